use cochlea_core::cochlea::*;
use cochlea_core::{vec3, Error, Vec3};
use nalgebra::{Rotation3, Unit};

fn model() -> CochleaModel {
    CochleaModel::new(CochleaParams::default()).unwrap()
}

#[test]
fn doi_reference_and_one_turn() {
    let m = model();
    assert_eq!(m.doi_of_point(&m.path_point(0.0)).unwrap(), 0.0);
    assert!((m.doi_of_point(&m.path_point(360.0)).unwrap() - 360.0).abs() < 1.0);
    let mut prev = -1.0;
    for i in 0..=900 {
        let d = m.doi_of_point(&m.path_point(i as f64)).unwrap();
        assert!((d - i as f64).abs() < 1.0);
        if i > 0 {
            assert!(d > prev);
        }
        prev = d;
    }
}

#[test]
fn doi_far_point_is_error() {
    let m = model();
    assert!(matches!(m.doi_of_point(&vec3(20.0, 0.0, 0.0)), Err(Error::OutsideModel(_))));
}

#[test]
fn neighborhood_spread() {
    let m = model();
    let p = m.path_point(200.0);
    let (lo, hi) = m.doi_neighborhood(&p, 0.3).unwrap();
    assert!(hi - lo < 180.0);
    let (lo, hi) = m.doi_neighborhood(&p, 0.0).unwrap();
    assert_eq!(lo, hi);
    // midway between the turns at 100 and 460 degrees
    let mid = (m.path_point(100.0) + m.path_point(460.0)) / 2.0;
    let (lo, hi) = m.doi_neighborhood(&mid, 0.3).unwrap();
    assert!(hi - lo >= 180.0, "{lo} {hi}");
}

#[test]
fn greenwood_endpoints() {
    let m = model();
    assert!((m.place_frequency(900.0).unwrap() - 19.848).abs() < 1e-9);
    let base = 165.4 * (10f64.powf(2.1) - 0.88);
    assert!((m.place_frequency(0.0).unwrap() - base).abs() < 1e-9);
    assert!((base - 20677.0).abs() < 1.0);
    assert!(m.place_frequency(901.0).is_err());
}

#[test]
fn modiolar_offset_along_normal() {
    let m = model();
    let v = m.modiolar_vertices()[300 * 9 + 4];
    assert_eq!(m.modiolar_distance(&v.position), 0.0);
    let p = v.position + v.normal * 1.0;
    assert!((m.modiolar_distance(&p) - 1.0).abs() < 0.05);
}

#[test]
fn membrane_sign_convention() {
    let m = model();
    let q = m.membrane_points()[400 * 11 + 5];
    assert_eq!(m.basilar_signed_distance(&q), 0.0);
    let a = m.axis();
    assert!((m.basilar_signed_distance(&(q - a * 0.5)) + 0.5).abs() < 0.05);
    let up = m.basilar_signed_distance(&(q + a * 0.3));
    let down = m.basilar_signed_distance(&(q - a * 0.3));
    assert!((up + down).abs() < 1e-12);
}

#[test]
fn rigid_motion_invariance() {
    let m = model();
    let rot = Rotation3::from_axis_angle(&Unit::new_normalize(vec3(1.0, 2.0, -0.5)), 0.7);
    let t = vec3(3.0, -1.0, 2.0);
    let mv = |v: [f64; 3]| {
        let r = rot * vec3(v[0], v[1], v[2]);
        [r.x, r.y, r.z]
    };
    let mut q = CochleaParams::default();
    let c = rot * Vec3::zeros() + t;
    q.center = [c.x, c.y, c.z];
    q.axis = mv(q.axis);
    q.reference = mv(q.reference);
    let m2 = CochleaModel::new(q).unwrap();
    let p = vec3(1.0, 2.5, 0.3);
    let p2 = rot * p + t;
    assert!((m.modiolar_distance(&p) - m2.modiolar_distance(&p2)).abs() < 1e-9);
    assert!((m.doi_of_point(&p).unwrap() - m2.doi_of_point(&p2).unwrap()).abs() < 1e-9);
}

#[test]
fn toml_round_trip() {
    let m = model();
    let back = CochleaModel::from_toml(&m.to_toml()).unwrap();
    assert_eq!(back, m);
}
