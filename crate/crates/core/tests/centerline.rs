mod support;

use std::collections::HashSet;

use cochlea_core::array::{ArrayModel, Family};
use cochlea_core::centerline::*;
use cochlea_core::cochlea::CochleaModel;
use cochlea_core::geom::{cumulative_length, point_polyline_distance};
use cochlea_core::params::ClParams;
use cochlea_core::phantom::{place_contacts, synth_case, PhantomSpec};
use cochlea_core::{vec3, Error, Vec3, Volume3};
use proptest::prelude::*;
use support::{brute_force, candidate};

fn uniform_array(n: usize, d: f64) -> ArrayModel {
    ArrayModel::new("U", Family::Cochlear, vec![d; n - 1], 0.2, 0.2).unwrap()
}

#[test]
fn layout_counts() {
    assert_eq!(enumerate_layouts(1).unwrap().len(), 1);
    // two singletons plus four distinct end-to-end joinings of the pair
    assert_eq!(enumerate_layouts(2).unwrap().len(), 6);
    assert!(matches!(enumerate_layouts(0), Err(Error::Empty(_))));
    assert!(matches!(enumerate_layouts(AXIS_CAP + 1), Err(Error::TooManyAxes { .. })));
}

fn reversed(l: &Layout) -> Layout {
    l.iter().rev().map(|&(a, r)| (a, !r)).collect()
}

#[test]
fn layouts_cover_every_sequence_once_up_to_reversal() {
    for n in 1..=4 {
        let layouts = enumerate_layouts(n).unwrap();
        let mut seen = HashSet::new();
        for l in &layouts {
            let key = std::cmp::min(l.clone(), reversed(l));
            assert!(seen.insert(key), "duplicate {l:?}");
        }
        // ordered sequences of k distinct axes with 2^k orientations, halved
        let mut total = 0usize;
        for k in 1..=n {
            let perms: usize = (n - k + 1..=n).product();
            total += perms << k;
        }
        assert_eq!(layouts.len(), total / 2);
    }
}

#[test]
fn length_penalty_examples() {
    let p = ClParams::default();
    let term = |len: f64, de: f64| (len - de).abs() * length_weight(len, de, &p);
    assert!((term(17.0, 20.0) - 1.077).abs() < 1e-12);
    assert_eq!(term(20.0, 20.0), 0.0);
    assert_eq!(length_weight(19.0, 20.0, &p), p.mu3);
    assert!((length_weight(22.0, 20.0, &p) - (p.mu3 + p.mu5 * 0.1)).abs() < 1e-12);
}

fn line(n: usize, h: f64) -> Vec<Vec3> {
    (0..n).map(|i| vec3(i as f64 * h, 0.0, 0.0)).collect()
}

#[test]
fn equal_depth_is_rejected() {
    let c = candidate(line(5, 1.0), vec![100.0; 5], vec![1.0; 5], vec![1.0; 5]);
    let s = CostScale { blob_apical_max: 1.0, blob_basal_max: 1.0, expected_length: 3.0 };
    let p = ClParams::default();
    for i in 0..5 {
        for j in 0..5 {
            assert!(array_candidate_cost(&c, i, j, &s, &p).is_none());
        }
    }
    assert!(matches!(find_centerline(&[c], &s, &p), Err(Error::NoAdmissibleCandidate)));
    assert!(find_centerline(&[], &s, &p).is_err());
}

#[test]
fn constructed_instance_returns_true_endpoints() {
    let pts = line(141, 0.1);
    let (ta, tb) = (120usize, 20usize);
    let doi: Vec<f64> = pts.iter().map(|p| 30.0 * p.x).collect();
    let peak = |c: usize| -> Vec<f64> { (0..141).map(|i| (-((i as f64 - c as f64) / 3.0).powi(2)).exp()).collect() };
    let c = candidate(pts, doi, peak(ta), peak(tb));
    let s = CostScale { blob_apical_max: 1.0, blob_basal_max: 1.0, expected_length: 10.0 };
    let got = find_centerline(&[c], &s, &ClParams::default()).unwrap();
    assert_eq!((got.apical, got.basal), (ta, tb));
}

fn arb_candidate() -> impl Strategy<Value = CenterlineCandidate> {
    (2usize..40).prop_flat_map(|n| {
        (
            prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0, -2.0f64..2.0), n),
            prop::collection::vec(prop_oneof![3 => 0.0f64..700.0, 1 => Just(f64::NAN)], n),
            prop::collection::vec(0.0f64..1.0, n),
            prop::collection::vec(0.0f64..1.0, n),
        )
            .prop_map(|(pts, doi, ba, bb)| {
                candidate(pts.into_iter().map(|(x, y, z)| vec3(x, y, z)).collect(), doi, ba, bb)
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn exhaustive_search_matches_brute_force(
        cands in prop::collection::vec(arb_candidate(), 1..5),
        de in 1.0f64..20.0,
    ) {
        let max = |f: fn(&CenterlineCandidate) -> &Vec<f64>| {
            cands.iter().flat_map(|c| f(c).iter().cloned()).fold(0.0, f64::max)
        };
        let s = CostScale { blob_apical_max: max(|c| &c.blob_apical), blob_basal_max: max(|c| &c.blob_basal), expected_length: de };
        let p = ClParams::default();
        let got = find_centerline(&cands, &s, &p);
        match brute_force(&cands, &s, &p) {
            None => prop_assert!(got.is_err()),
            Some((k, i, j, cost)) => {
                let got = got.unwrap();
                prop_assert_eq!((got.candidate, got.apical, got.basal), (k, i, j));
                prop_assert_eq!(got.cost, cost);
                let c = &cands[k];
                prop_assert!(c.doi[got.apical] > c.doi[got.basal]);
            }
        }
    }

    #[test]
    fn cost_ignores_storage_order(c in arb_candidate(), de in 1.0f64..20.0) {
        let n = c.points.len();
        let rev = |v: &Vec<f64>| v.iter().rev().cloned().collect::<Vec<_>>();
        let r = candidate(c.points.iter().rev().copied().collect(), rev(&c.doi), rev(&c.blob_apical), rev(&c.blob_basal));
        let s = CostScale { blob_apical_max: 1.0, blob_basal_max: 1.0, expected_length: de };
        let p = ClParams::default();
        for i in 0..n {
            for j in 0..n {
                let a = array_candidate_cost(&c, i, j, &s, &p);
                let b = array_candidate_cost(&r, n - 1 - i, n - 1 - j, &s, &p);
                prop_assert_eq!(a.is_some(), b.is_some());
                if let (Some(a), Some(b)) = (a, b) {
                    prop_assert!((a - b).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn resampled_contacts_lie_on_the_line(
        pts in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0, -5.0f64..5.0), 2..30),
        n in 2usize..12,
        d in 0.1f64..2.0,
    ) {
        let line: Vec<Vec3> = pts.into_iter().map(|(x, y, z)| vec3(x, y, z)).collect();
        prop_assume!(cumulative_length(&line).last().copied().unwrap_or(0.0) > 0.0);
        let out = resample_by_spacing(&line, &uniform_array(n, d)).unwrap();
        prop_assert_eq!(out.len(), n);
        prop_assert_eq!(out[0], line[0]);
        for c in &out {
            prop_assert!(point_polyline_distance(c, &line) < 1e-9);
        }
    }
}

#[test]
fn resampling_a_straight_line() {
    let out = resample_by_spacing(&line(101, 0.1), &uniform_array(11, 1.0)).unwrap();
    for (k, c) in out.iter().enumerate() {
        assert!((c - vec3(k as f64, 0.0, 0.0)).norm() < 1e-9);
    }
    // a line at 90% of the array length shrinks every spacing to 0.9 mm
    let out = resample_by_spacing(&line(91, 0.1), &uniform_array(11, 1.0)).unwrap();
    for (k, c) in out.iter().enumerate() {
        assert!((c.x - 0.9 * k as f64).abs() < 1e-9);
    }
    assert!(resample_by_spacing(&[Vec3::zeros(), Vec3::zeros()], &uniform_array(3, 1.0)).is_err());
}

#[test]
fn resampling_the_true_centerline() {
    let arr = ArrayModel::preset("CO1").unwrap();
    let spec = PhantomSpec::clean(arr.clone());
    let model = CochleaModel::new(spec.cochlea.clone()).unwrap();
    let thetas = place_contacts(&model, &arr, spec.insertion_depth, spec.lateral_offset).unwrap();
    let truth: Vec<Vec3> = thetas.iter().map(|&t| model.point_at(t, spec.lateral_offset)).collect();
    // contacts sit at chord spacing, so the centerline through them reproduces them
    let dense: Vec<Vec3> = truth
        .windows(2)
        .flat_map(|w| (0..50).map(move |s| w[0] + (w[1] - w[0]) * (s as f64 / 50.0)))
        .chain(std::iter::once(*truth.last().unwrap()))
        .collect();
    let out = resample_by_spacing(&dense, &arr).unwrap();
    for (a, b) in out.iter().zip(&truth) {
        assert!((a - b).norm() <= 0.05, "{a:?} {b:?}");
    }
}

#[test]
fn feature_image_normalization() {
    let intensity = Volume3::new([2, 1, 1], [0.1; 3], [0.0; 3], vec![400.0, 1200.0]).unwrap();
    let vessel = intensity.with_data(vec![2.0, 0.5]).unwrap();
    let f = ClFeatures { intensity, vessel, t_i: 400.0, t_v: 2.0 };
    let p = ClParams::default();
    let fi = f.feature_image(&p).unwrap();
    assert_eq!(fi.data()[0], 0.0);
    let flat = ClParams { rho: 0.0, ..ClParams::default() };
    let fi = f.feature_image(&flat).unwrap();
    assert_eq!(fi.data(), &[0.0, 2.0]);
}

#[test]
fn axis_cap_limits_the_regions() {
    let mut data = vec![-1.0f32; 40 * 10 * 10];
    for blob in 0..7 {
        for i in 0..3 {
            data[(5 * 10 + 5) * 40 + blob * 5 + i + 1] = 1.0;
        }
    }
    let v = Volume3::new([40, 10, 10], [0.1; 3], [0.0; 3], data).unwrap();
    assert_eq!(cl_axes(&v).unwrap().len(), AXIS_CAP);
    let empty = v.with_data(vec![-1.0; 4000]).unwrap();
    assert!(cl_axes(&empty).is_err());
}

#[test]
fn phantom_case_is_deterministic_and_depth_ordered() {
    let arr = ArrayModel::preset("CO2").unwrap();
    let spec = PhantomSpec { confounders: 0, seed: 11, ..PhantomSpec::new(arr.clone()) };
    let case = synth_case(&spec).unwrap();
    let p = ClParams::default();
    let a = localize_cl(&case.volume, &case.bbox, &arr, &case.model, &p).unwrap();
    let b = localize_cl(&case.volume, &case.bbox, &arr, &case.model, &p).unwrap();
    assert_eq!(a.result.contacts, b.result.contacts);
    assert_eq!(a.result.len(), arr.contact_count());
    let doi = &a.result.doi;
    assert!(doi[0] > doi[doi.len() - 1]);
    let diag = case.volume.voxel_diagonal();
    let worst = a.result.contacts.iter().zip(&case.truth.contacts).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
    assert!(worst <= diag, "{worst}");
}
