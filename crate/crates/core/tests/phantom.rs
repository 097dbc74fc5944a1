use cochlea_core::array::ArrayModel;
use cochlea_core::phantom::*;

fn bare(name: &str) -> PhantomSpec {
    PhantomSpec { bone_shell: false, lead_length: 0.0, ..PhantomSpec::clean(ArrayModel::preset(name).unwrap()) }
}

#[test]
fn noiseless_voxels_follow_the_analytic_field() {
    let spec = bare("MD1");
    let case = synth_case(&spec).unwrap();
    let v = &case.volume;
    // blobs are truncated at four sigma
    let tol = spec.contact_intensity * (-8.0f64).exp() * 2.0 + 1e-3;
    for idx in (0..v.len()).step_by(17) {
        let p = v.index_to_world(idx);
        let expect = contact_field(&spec, &case.truth.contacts, &p);
        assert!((v.data()[idx] as f64 - expect).abs() <= tol, "{idx}");
    }
}

#[test]
fn adjacent_contacts_sit_at_the_array_spacings() {
    for name in ["MD1", "AB1", "CO1", "CO2"] {
        let case = synth_case(&PhantomSpec::new(ArrayModel::preset(name).unwrap())).unwrap();
        let c = &case.truth.contacts;
        assert_eq!(c.len(), case.spec.array.contact_count());
        for (w, d) in c.windows(2).zip(&case.spec.array.spacings) {
            assert!(((w[1] - w[0]).norm() - d).abs() < 0.02, "{name}");
        }
        // depth strictly increases from the basal to the apical contact
        let doi: Vec<f64> = c.iter().map(|p| case.model.doi_of_point(p).unwrap()).collect();
        assert!(doi.windows(2).all(|w| w[0] > w[1]), "{name}");
        assert!((doi[0] - case.spec.insertion_depth).abs() < 1.0);
        for p in c {
            assert!(case.bbox.contains(p));
        }
    }
}

#[test]
fn apical_contact_is_the_local_maximum() {
    let case = synth_case(&PhantomSpec::clean(ArrayModel::preset("CO1").unwrap())).unwrap();
    let v = &case.volume;
    let apex = case.truth.contacts[0];
    let near: Vec<usize> = (0..v.len()).filter(|&i| (v.index_to_world(i) - apex).norm() <= 0.5).collect();
    let best = near.iter().max_by(|&&a, &&b| v.data()[a].total_cmp(&v.data()[b])).unwrap();
    let nearest = near
        .iter()
        .min_by(|&&a, &&b| (v.index_to_world(a) - apex).norm().total_cmp(&(v.index_to_world(b) - apex).norm()))
        .unwrap();
    assert_eq!(best, nearest);
}

#[test]
fn limited_mode_clamps_at_bone() {
    let spec = PhantomSpec { mode: HuMode::Limited, ..PhantomSpec::new(ArrayModel::preset("CO1").unwrap()) };
    let case = synth_case(&spec).unwrap();
    let (_, hi) = case.volume.min_max();
    assert_eq!(hi as f64, spec.bone_intensity);
    // clamped voxels come from both bone and metal
    let clamped: Vec<usize> = (0..case.volume.len()).filter(|&i| case.volume.data()[i] == hi).collect();
    let near_contact = |i: usize| {
        let p = case.volume.index_to_world(i);
        case.truth.contacts.iter().any(|c| (p - c).norm() < 0.2)
    };
    assert!(clamped.iter().any(|&i| near_contact(i)));
    assert!(clamped.iter().any(|&i| !near_contact(i)));
}

#[test]
fn suites_are_reproducible_and_jittered() {
    let base = PhantomSpec::new(ArrayModel::preset("MD1").unwrap());
    let a = synth_suite(&base, 3, 9).unwrap();
    let b = synth_suite(&base, 3, 9).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.volume, y.volume);
        assert_eq!(x.truth, y.truth);
    }
    assert_ne!(a[0].truth, a[1].truth);
    assert_ne!(a[1].truth, a[2].truth);
    assert!(synth_suite(&base, 0, 9).is_err());
}

#[test]
fn suite_depths_center_on_the_base_depth() {
    let base = PhantomSpec::new(ArrayModel::preset("MD1").unwrap());
    let n = 400;
    let depths: Vec<f64> = suite_specs(&base, n, 21).iter().map(|s| s.insertion_depth).collect();
    let mean = depths.iter().sum::<f64>() / n as f64;
    // uniform jitter of +-30 degrees
    let se = 60.0 / 12f64.sqrt() / (n as f64).sqrt();
    assert!((mean - base.insertion_depth).abs() < 3.0 * se, "{mean}");
}

#[test]
fn invalid_specs_are_rejected() {
    let base = PhantomSpec::new(ArrayModel::preset("MD1").unwrap());
    assert!(synth_case(&PhantomSpec { insertion_depth: 2000.0, ..base.clone() }).is_err());
    assert!(synth_case(&PhantomSpec { spacing: 0.0, ..base.clone() }).is_err());
    assert!(synth_case(&PhantomSpec { insertion_depth: 100.0, ..base }).is_err());
}

#[test]
fn saved_cases_load_back() {
    let dir = tempfile::tempdir().unwrap();
    let cases = synth_suite(&bare("AB1"), 2, 4).unwrap();
    save_suite(dir.path(), &cases).unwrap();
    let prefix = case_prefix(dir.path(), 1);
    assert_eq!(case_array(&prefix).unwrap(), "AB1");
    let files = load_case(&prefix, "AB1").unwrap();
    assert_eq!(files.volume, cases[1].volume);
    assert_eq!(files.model, cases[1].model);
    let truth = files.truth.unwrap();
    for (a, b) in truth.contacts.iter().zip(&cases[1].truth.contacts) {
        assert!((a - b).norm() < 1e-9);
    }
    assert!(case_array(&case_prefix(dir.path(), 5)).is_err());
}
