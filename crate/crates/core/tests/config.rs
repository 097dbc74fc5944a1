mod support;

use cochlea_core::array::Family;
use cochlea_core::config::distance::sum_local_maxima;
use cochlea_core::config::features::{area_against, line_m, threshold_r, threshold_t};
use cochlea_core::config::nnls::nnls;
use cochlea_core::config::train::{solve_weights, training_masks};
use cochlea_core::config::*;
use cochlea_core::dvf::{log_grid, DvfSet};
use nalgebra::{DMatrix, DVector};
use support::{oracle_features, oracle_select, random_set, random_weights};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;


#[test]
fn threshold_point_values() {
    assert!((threshold_t(1.0) - 1.6863).abs() < 1e-9);
    assert!((threshold_r(1.0) - 0.0729).abs() < 1e-9);
    assert!((line_m(1000.0) - 20.94).abs() < 1e-9);
}

#[test]
fn area_of_a_curve_one_below_at_ten_points() {
    let env = vec![3.0; 30];
    let mut curve = env.clone();
    for v in curve.iter_mut().skip(5).take(10) {
        *v -= 1.0;
    }
    assert_eq!(area_against(&curve, &env), 10.0);
    assert_eq!(area_against(&env, &env), 0.0);
}

#[test]
fn depth_examples() {
    let freqs = log_grid(8000.0, 100.0, 5).unwrap();
    let s = DvfSet::from_curves(freqs.clone(), vec![vec![2.0; 5], vec![1.0, 1.0, 0.5, 1.0, 1.0], vec![2.5; 5]]).unwrap();
    assert_eq!(features::depth_i(&s, 1), 1.5);
    let s = DvfSet::from_curves(freqs.clone(), vec![vec![1.5; 5], vec![1.0, 1.0, 0.5, 1.0, 1.0], vec![2.5; 5]]).unwrap();
    assert_eq!(features::depth_i(&s, 1), 1.0);
    assert_eq!(features::depth_i(&s, 0), 0.0);
    let same = DvfSet::from_curves(freqs, vec![vec![1.0; 5]; 3]).unwrap();
    assert!((0..3).all(|i| features::depth_i(&same, i) == 0.0));
}

#[test]
fn simple_feature_cases() {
    let s = random_set(6, 1);
    let all = compute_features(&s, &Configuration::all_active(6)).unwrap();
    assert_eq!(all.0[0], 0.0);
    assert_eq!(all.0[1], 1.0 / 6.0);
    let off = compute_features(&s, &Configuration::parse_mask("-+++++").unwrap()).unwrap();
    assert_eq!(off.0[0], 1.0);
    assert_eq!(off.0[1], 1.0 / 5.0);
    // identical curves: no minimum lies strictly above another curve
    let flat = DvfSet::from_curves(log_grid(8000.0, 100.0, 5).unwrap(), vec![vec![1.0; 5]; 4]).unwrap();
    assert_eq!(compute_features(&flat, &Configuration::all_active(4)).unwrap().0[5], 0.0);
    assert!(compute_features(&s, &Configuration::from_bits(0, 6)).is_err());
    assert!(compute_features(&s, &Configuration::all_active(5)).is_err());
}

#[test]
fn cost_is_linear_and_matches_published_weight() {
    let md = WeightSet::preset(Family::MedEl);
    let mut unit = FeatureVector::zero();
    unit.0[0] = 1.0;
    assert_eq!(md.cost(&unit), 0.68);
    assert_eq!(md.cost(&FeatureVector::zero()), 0.0);
    let f = FeatureVector([0.3, 1.0, 0.2, 0.1, 2.0, 0.5, 0.7, 0.4, 0.3, 0.8]);
    let g = FeatureVector([1.0, 0.5, 0.9, 0.6, 0.0, 0.25, 0.1, 0.95, 0.77, 0.3]);
    let mut sum = f;
    for (a, b) in sum.0.iter_mut().zip(&g.0) {
        *a += b;
    }
    for fam in [Family::MedEl, Family::AdvancedBionics, Family::Cochlear] {
        let w = WeightSet::preset(fam);
        assert!((w.cost(&sum) - w.cost(&f) - w.cost(&g)).abs() < 1e-12);
    }
}

#[test]
fn selection_matches_brute_force_on_random_sets() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for case in 0..100u64 {
        let k = rng.random_range(1..=12usize);
        let s = random_set(k, 1000 + case);
        let w = match case % 4 {
            0 => WeightSet::preset(Family::MedEl),
            1 => WeightSet::preset(Family::AdvancedBionics),
            2 => WeightSet::preset(Family::Cochlear),
            _ => random_weights(&mut rng),
        };
        let fast = select_configuration(&s, &w).unwrap();
        let (bits, cost) = oracle_select(&s, &w);
        assert_eq!(fast.config.bits(), bits, "case {case} k {k}");
        assert!((fast.cost - cost).abs() <= 1e-12 * cost.abs().max(1.0));
        let naive = select_configuration_naive(&s, &w, EnvelopeMode::All).unwrap();
        assert_eq!(naive.config, fast.config);
        assert_eq!(naive.cost, fast.cost);
    }
}

#[test]
fn twelve_electrodes_score_every_nonempty_mask() {
    let s = random_set(12, 5);
    let sel = select_configuration(&s, &WeightSet::preset(Family::Cochlear)).unwrap();
    assert_eq!(sel.scored, 4095);
}

#[test]
fn single_electrode_is_kept() {
    let s = DvfSet::from_curves(log_grid(8000.0, 100.0, 10).unwrap(), vec![vec![0.7; 10]]).unwrap();
    for fam in [Family::MedEl, Family::AdvancedBionics, Family::Cochlear] {
        let sel = select_configuration(&s, &WeightSet::preset(fam)).unwrap();
        assert_eq!(sel.config, Configuration::all_active(1));
        assert_eq!(sel.scored, 1);
    }
}

#[test]
fn per_mask_envelope_agrees_when_everything_is_active() {
    for seed in 0..10 {
        let s = random_set(7, seed);
        let all = Configuration::all_active(7);
        let a = compute_features_with(&s, &all, EnvelopeMode::All).unwrap();
        let b = compute_features_with(&s, &all, EnvelopeMode::Active).unwrap();
        for (x, y) in a.0.iter().zip(&b.0) {
            assert!((x - y).abs() < 1e-12);
        }
    }
    let s = random_set(6, 3);
    let sel = select_configuration_naive(&s, &WeightSet::preset(Family::Cochlear), EnvelopeMode::Active).unwrap();
    assert!(sel.config.active_count() >= 1 && sel.cost.is_finite());
    assert_eq!(sel.scored, 63);
}

#[test]
fn twenty_two_electrodes_enumerate_quickly() {
    let s = random_set(22, 8);
    let t = std::time::Instant::now();
    let sel = select_configuration(&s, &WeightSet::preset(Family::Cochlear)).unwrap();
    assert_eq!(sel.scored, (1 << 22) - 1);
    assert!(t.elapsed().as_secs() < 120);
    let terms = ElectrodeTerms::new(&s).unwrap();
    assert_eq!(terms.features(sel.config.bits()), compute_features(&s, &sel.config).unwrap());
    assert!(ElectrodeTerms::new(&random_set(25, 1)).is_err());
}

#[test]
fn distance_examples() {
    let p = |s: &str| Configuration::parse_mask(s).unwrap();
    assert_eq!(config_distance(&p("+-+-+"), &p("+-+-+")).unwrap(), 0.0);
    assert_eq!(config_distance(&p("+++++"), &p("+-+-+")).unwrap(), 2.0);
    let opt = p("+-+-+-+-++++++++");
    let flip = |idx: &[usize]| {
        let mut c = opt.clone();
        for &i in idx {
            c.active[i] = !c.active[i];
        }
        c
    };
    let dispersed = flip(&[0, 2, 4, 6, 8]);
    let clustered = flip(&[11, 12, 13, 14, 15]);
    assert_eq!(config_distance(&dispersed, &opt).unwrap(), 5.0);
    assert_eq!(config_distance(&clustered, &opt).unwrap(), 8.0);
    assert_eq!(mismatch_distances(&clustered, &opt).unwrap()[11..], [4, 5, 6, 7, 8]);
    let on = Configuration::all_active(6);
    let off = Configuration::from_bits(0, 6);
    assert_eq!(mismatch_distances(&on, &off).unwrap(), vec![6; 6]);
    assert_eq!(config_distance(&on, &off).unwrap(), 6.0);
    assert!(config_distance(&on, &Configuration::all_active(5)).is_err());
    assert_eq!(sum_local_maxima(&[0, 2, 2, 1, 3, 3, 3, 0]), 5);
}

#[test]
fn target_cost_branches() {
    let p = |s: &str| Configuration::parse_mask(s).unwrap();
    let opt = p("++-++");
    let ok = vec![p("+++++")];
    assert_eq!(target_cost(&opt, &opt, &ok).unwrap(), 0.0);
    assert_eq!(target_cost(&p("+++++"), &opt, &ok).unwrap(), 0.5);
    let other = p("-+-++");
    assert_eq!(target_cost(&other, &opt, &ok).unwrap(), config_distance(&other, &opt).unwrap());
}

#[test]
fn mask_and_csv_formats() {
    let c = Configuration::parse_mask("+\u{2212}+-").unwrap();
    assert_eq!(c.to_mask_string(), "+-+-");
    assert_eq!(c.bits(), 0b0101);
    assert_eq!(Configuration::from_bits(0b0101, 4), c);
    assert_eq!(c.to_csv(), "index,active\n1,1\n2,0\n3,1\n4,0\n");
    assert_eq!(Configuration::from_csv(&c.to_csv()).unwrap(), c);
    assert!(Configuration::parse_mask("+x").is_err());
    assert!(Configuration::from_csv("index,active\n2,1\n").is_err());
}

#[test]
fn weight_file_round_trip() {
    let w = WeightSet::new(Family::AdvancedBionics, [0.28, 1e-9, 0.0, 6e-9, 0.0832, 1.37, 0.0, 0.0, 0.0, 1.0], -0.25).unwrap();
    let back = WeightSet::from_toml(&w.to_toml()).unwrap();
    assert_eq!(back, w);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("w.toml");
    w.save(&path).unwrap();
    assert_eq!(WeightSet::load(&path).unwrap(), w);
    assert!(WeightSet::from_toml("family = \"MD\"\nweights = [1.0]\n").is_err());
    assert!(WeightSet::new(Family::MedEl, [-1.0; 10], 0.0).is_err());
    let pruned = w.pruned(1e-8);
    assert_eq!(pruned.weights[1], 0.0);
    assert_eq!(pruned.weights[3], 0.0);
    assert_eq!(pruned.weights[0], 0.28);
}

#[test]
fn nnls_recovers_forward_generated_weights() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let a = DMatrix::from_fn(60, 10, |_, _| rng.random_range(-1.0..1.0));
    let x_true = DVector::from_vec(vec![0.5, 0.0, 2.0, 0.0, 0.1, 1.5, 0.0, 0.3, 0.0, 0.9]);
    let b = &a * &x_true;
    let sol = nnls(&a, &b).unwrap();
    assert!(sol.residual / b.norm() < 1e-6);
    assert!(sol.x.iter().all(|&v| v >= 0.0));
    assert!((&sol.x - &x_true).norm() < 1e-8);
    assert!(!sol.rank_deficient);
    let zero = nnls(&a, &DVector::zeros(60)).unwrap();
    assert!(zero.x.iter().all(|&v| v == 0.0));
    assert!(nnls(&a, &DVector::zeros(5)).is_err());
}

#[test]
fn training_recovers_weights_from_generated_costs() {
    let s = random_set(8, 21);
    let terms = ElectrodeTerms::new(&s).unwrap();
    let rows: Vec<FeatureVector> = (1u32..256).map(|m| terms.features(m)).collect();
    let w_true = [0.7, 0.0, 0.4, 0.0, 0.2, 1.3, 0.0, 0.0, 0.0, 0.5];
    let delta = 0.3;
    let targets: Vec<f64> = rows.iter().map(|f| w_true.iter().zip(&f.0).map(|(w, x)| w * x).sum::<f64>() + delta).collect();
    let rep = solve_weights(&rows, &targets, Family::MedEl).unwrap();
    let norm = targets.iter().map(|t| t * t).sum::<f64>().sqrt();
    assert!(rep.residual / norm < 1e-6, "{}", rep.residual);
    assert!(rep.weights.weights.iter().all(|&w| w >= 0.0));
    let zero = solve_weights(&rows, &vec![0.0; rows.len()], Family::MedEl).unwrap();
    assert!(zero.weights.weights.iter().all(|&w| w == 0.0));
    assert_eq!(zero.weights.delta, 0.0);
}

#[test]
fn trained_weights_are_nonnegative_and_prunable() {
    let subjects: Vec<TrainingSubject> = (0..4)
        .map(|i| {
            let dvf = random_set(8, 300 + i);
            let optimal = select_configuration(&dvf, &WeightSet::preset(Family::MedEl)).unwrap().config;
            let mut alt = optimal.clone();
            alt.active[3] = !alt.active[3];
            TrainingSubject { dvf, optimal, acceptable: vec![alt] }
        })
        .collect();
    let rep = train_weights(&subjects, Family::MedEl, 500, 1).unwrap();
    assert_eq!(rep.rows, 4 * 255);
    assert!(rep.weights.weights.iter().all(|&w| w >= 0.0));
    let pruned = rep.weights.pruned(1e-13);
    for s in &subjects {
        let a = select_configuration(&s.dvf, &rep.weights).unwrap();
        let b = select_configuration(&s.dvf, &pruned).unwrap();
        assert_eq!(a.config, b.config);
    }
    assert!(train_weights(&[], Family::MedEl, 10, 1).is_err());
}

#[test]
fn large_arrays_sample_training_rows() {
    let dvf = random_set(20, 2);
    let optimal = Configuration::all_active(20);
    let s = TrainingSubject { dvf, optimal: optimal.clone(), acceptable: vec![] };
    let masks = training_masks(&s, 300, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    assert_eq!(masks.len(), 300);
    assert_eq!(masks[0], optimal.bits());
    for i in 0..20 {
        assert!(masks.contains(&(optimal.bits() ^ 1 << i)));
    }
    let again = training_masks(&s, 300, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    assert_eq!(masks, again);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn features_match_the_oracle(k in 1usize..8, seed in any::<u64>(), bits in 1u32..256) {
        let s = random_set(k, seed);
        let bits = bits & ((1 << k) - 1);
        prop_assume!(bits != 0);
        let c = Configuration::from_bits(bits, k);
        let f = compute_features(&s, &c).unwrap();
        let o = oracle_features(&s, &c.active);
        for (x, y) in f.0.iter().zip(&o) {
            prop_assert!((x - y).abs() <= 1e-12 * y.abs().max(1.0), "{:?} vs {:?}", f.0, o);
        }
        prop_assert_eq!(ElectrodeTerms::new(&s).unwrap().features(bits), f);
    }

    #[test]
    fn root_features_square_back(k in 1usize..10, seed in any::<u64>(), bits in 1u32..1024, mode in any::<bool>()) {
        let s = random_set(k, seed);
        let bits = bits & ((1 << k) - 1);
        prop_assume!(bits != 0);
        let c = Configuration::from_bits(bits, k);
        let mode = if mode { EnvelopeMode::Active } else { EnvelopeMode::All };
        let f = compute_features_with(&s, &c, mode).unwrap().0;
        prop_assert!((f[7] * f[7] - f[2]).abs() < 4.0 * f64::EPSILON);
        prop_assert!((f[8] * f[8] - f[3]).abs() < 4.0 * f64::EPSILON);
        prop_assert!((f[9] * f[9] - f[6]).abs() < 4.0 * f64::EPSILON);
        prop_assert_eq!(f[1] * c.active_count() as f64, 1.0);
        // the epsilon floor can drive exp(-T / eps) to exactly zero
        prop_assert!((0.0..=1.0).contains(&f[2]) && (0.0..=1.0).contains(&f[3]) && (0.0..=1.0).contains(&f[6]));
        prop_assert!(f[4] >= 0.0 && f[5] >= 0.0 && f[5] <= k as f64 / c.active_count() as f64);
    }

    #[test]
    fn distance_to_self_is_zero_and_distances_nonnegative(k in 1usize..16, a in any::<u32>(), b in any::<u32>()) {
        let mask = (1u32 << k) - 1;
        let x = Configuration::from_bits(a & mask, k);
        let y = Configuration::from_bits(b & mask, k);
        prop_assert_eq!(config_distance(&x, &x).unwrap(), 0.0);
        let d = config_distance(&x, &y).unwrap();
        prop_assert!(d >= 0.0);
        prop_assert_eq!(d == 0.0, x == y);
    }

    #[test]
    fn nnls_satisfies_optimality_conditions(seed in any::<u64>(), m in 3usize..30, n in 1usize..10) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = DMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0));
        let b = DVector::from_fn(m, |_, _| rng.random_range(-1.0..1.0));
        let sol = nnls(&a, &b).unwrap();
        let g = a.transpose() * (&b - &a * &sol.x);
        for j in 0..n {
            prop_assert!(sol.x[j] >= 0.0);
            prop_assert!(g[j] <= 1e-9);
            if sol.x[j] > 0.0 {
                prop_assert!(g[j].abs() <= 1e-9);
            }
        }
    }
}
