mod support;

use cochlea_core::array::ArrayModel;
use cochlea_core::graph::*;
use cochlea_core::params::GpParams;
use cochlea_core::phantom::{synth_case, PhantomSpec};
use cochlea_core::{vec3, BoundingBox, Error};
use proptest::prelude::*;
use support::{path_violations, random_coi_instance};

#[test]
fn refinement_grid_is_a_centered_cube() {
    let p = GpParams::default();
    let g = grid_offsets(&p);
    assert_eq!(g.len(), 343);
    assert_eq!(g[171], vec3(0.0, 0.0, 0.0));
    assert_eq!(g[0], vec3(-0.09, -0.09, -0.09));
    assert_eq!(g[1] - g[0], vec3(0.03, 0.0, 0.0));
    let reach = p.phi_q * p.phi_r as f64 * 3f64.sqrt();
    assert!(g.iter().all(|o| o.norm() <= reach + 1e-12));
}

#[test]
fn hard_constraints_reject_each_violation() {
    // an instance whose first three spacings share one group
    let (array, mut set) = (0..)
        .map(|s| random_coi_instance(s, 6))
        .find(|(a, _)| a.contact_count() >= 4 && a.basal_first_spacings()[..3].iter().all(|&d| d == 1.0))
        .unwrap();
    let p = GpParams::default();
    let d = array.basal_first_spacings();
    let g = |d: f64| set.esd.iter().position(|&e| e == d).unwrap();
    // a straight chain of four candidates on one axis at the exact spacings
    let mut x = 0.0;
    let mut chain = Vec::new();
    for i in 0..4 {
        let group = if i == 0 { g(d[0]) } else { g(d[i - 1]) };
        if i > 0 {
            x += d[i - 1];
        }
        chain.push(Coi { pos: vec3(x, 10.0, 0.0), roi: 7, k: i, group, ..set.cois[0] });
    }
    let base = set.cois.len();
    set.cois.extend(chain);
    let ctx = SearchContext::new(&set, &array, &p, 0.0);
    let path = [base, base + 1, base + 2];
    assert!(ctx.admissible(&path));
    assert!(ctx.reachable(base + 1, &path[..1]));
    assert!(!ctx.reachable(base, &path[..1]), "distance and site");
    assert!(!ctx.reachable(base + 2, &path[..1]), "distance");
    assert!(!ctx.reachable(base + 1, &[]), "empty path");

    // same positions but the axis index runs backwards at the third node
    let mut set2 = set.clone();
    set2.cois[base + 2].k = 0;
    set2.cois[base].k = 1;
    set2.cois[base + 1].k = 2;
    let ctx2 = SearchContext::new(&set2, &array, &p, 0.0);
    assert!(!ctx2.admissible(&path));
    assert!(!path_violations(&set2, &array, &p, &[base, base + 1, base + 2, base + 3]).is_empty());
}

#[test]
fn random_instances_usually_have_paths() {
    let found = (0..200u64)
        .filter(|&s| {
            let (array, set) = random_coi_instance(s, 12);
            let p = GpParams::default();
            SearchContext::new(&set, &array, &p, 10.0).exhaustive().is_ok()
        })
        .count();
    assert!(found >= 50, "{found} of 200");
}

#[test]
fn seed_penalty_applies_to_weak_seeds_only() {
    let (array, set) = random_coi_instance(2, 6);
    let p = GpParams::default();
    let weak = (0..set.cois.len()).min_by(|&a, &b| set.cois[a].blob.total_cmp(&set.cois[b].blob)).unwrap();
    let ctx = SearchContext::new(&set, &array, &p, set.cois[weak].blob + 1.0);
    let plain = SearchContext::new(&set, &array, &p, 0.0);
    let base = plain.intensity_cost(weak, 1);
    assert!((ctx.intensity_cost(weak, 1) - SEED_PENALTY * base).abs() <= 1e-12 * base.abs().max(1.0));
    assert_eq!(ctx.intensity_cost(weak, 2), base);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn unbounded_beam_matches_exhaustive_enumeration(seed in 0u64..1_000_000) {
        let (array, set) = random_coi_instance(seed, 12);
        let p = GpParams::default();
        let ctx = SearchContext::new(&set, &array, &p, 10.0);
        match (ctx.beam_search(usize::MAX), ctx.exhaustive()) {
            (Ok(b), Ok(e)) => {
                prop_assert_eq!(&b, &e);
                prop_assert_eq!(b.cost, ctx.path_cost(&b.nodes));
                prop_assert!(path_violations(&set, &array, &p, &b.nodes).is_empty());
            }
            (Err(_), Err(_)) => {}
            (b, e) => prop_assert!(false, "beam {:?} vs exhaustive {:?}", b, e),
        }
    }

    #[test]
    fn any_beam_width_returns_an_admissible_path(seed in 0u64..1_000_000, beam in 1usize..8) {
        let (array, set) = random_coi_instance(seed, 12);
        let p = GpParams::default();
        let ctx = SearchContext::new(&set, &array, &p, 10.0);
        if let Ok(b) = ctx.beam_search(beam) {
            prop_assert!(path_violations(&set, &array, &p, &b.nodes).is_empty());
            let best = ctx.exhaustive().unwrap();
            prop_assert!(best.cost <= b.cost);
        }
    }
}

#[test]
fn phantom_result_satisfies_the_path_invariants() {
    let array = ArrayModel::preset("MD1").unwrap();
    let case = synth_case(&PhantomSpec { seed: 5, ..PhantomSpec::new(array.clone()) }).unwrap();
    let p = GpParams::default();
    let prep = prepare_gp(&case.volume, &case.bbox, &array, &case.model, &p).unwrap();
    let out = run_gp(&prep, &case.model, &p).unwrap();
    assert!(path_violations(&prep.cois, &array, &p, &out.path.nodes).is_empty());
    let ctx = SearchContext::new(&prep.cois, &array, &p, prep.features.t_b_seed);
    assert_eq!(out.path.cost, ctx.path_cost(&out.path.nodes));

    let reach = p.phi_q * p.phi_r as f64 * 3f64.sqrt();
    for (a, b) in out.result.contacts.iter().zip(&out.coarse.contacts) {
        assert!((a - b).norm() <= reach + 1e-12);
    }
    let again = localize_gp(&case.volume, &case.bbox, &array, &case.model, &p).unwrap();
    assert_eq!(again.result, out.result);

    // twins exist exactly where the DOI neighborhood spans half a turn
    let cois = &prep.cois.cois;
    for (i, c) in cois.iter().enumerate() {
        let twin = cois.iter().enumerate().any(|(j, o)| j != i && o.same_site(c));
        let (lo, hi) = case.model.doi_neighborhood(&c.pos, case.spec.spacing).unwrap();
        assert_eq!(twin, hi - lo >= TWIN_SPREAD_DEG, "candidate {i}");
        if c.phantom {
            assert_eq!(c.doi, hi);
        }
    }
}

#[test]
fn box_without_the_array_fails_before_the_search() {
    let array = ArrayModel::preset("MD1").unwrap();
    let case = synth_case(&PhantomSpec::clean(array.clone())).unwrap();
    let ext = case.volume.extent();
    let bbox = BoundingBox::new(ext.min, ext.min + vec3(3.0, 3.0, 3.0)).unwrap();
    let err = localize_gp(&case.volume, &bbox, &array, &case.model, &GpParams::default()).unwrap_err();
    assert!(matches!(err.root(), Error::NoCandidates(_)), "{err}");
}
