use cochlea_core::filters::*;
use cochlea_core::geom::{point_segment_distance, vec3};
use cochlea_core::{Vec3, Volume3};

fn grid(n: usize, h: f64, f: impl FnMut(Vec3) -> f64) -> Volume3 {
    Volume3::from_fn([n, n, n], [h; 3], [0.0; 3], f).unwrap()
}

fn blob(c: Vec3, s: f64, a: f64) -> impl Fn(Vec3) -> f64 {
    move |p| a * (-(p - c).norm_squared() / (2.0 * s * s)).exp()
}

fn tube(a: Vec3, b: Vec3, s: f64, amp: f64) -> impl Fn(Vec3) -> f64 {
    move |p| {
        let d = point_segment_distance(&p, &a, &b);
        amp * (-d * d / (2.0 * s * s)).exp()
    }
}

#[test]
fn blur_identity_and_dc() {
    let v = grid(8, 0.1, |p| p.x * 3.0 + p.y);
    assert_eq!(gaussian_blur(&v, 0.0).unwrap(), v);
    let c = Volume3::filled([9, 7, 5], [0.1; 3], [0.0; 3], 4.0).unwrap();
    let b = gaussian_blur(&c, 0.3).unwrap();
    assert!(b.data().iter().all(|&x| (x - 4.0).abs() < 1e-5));
}

#[test]
fn blur_impulse_matches_gaussian() {
    let n = 41;
    let h = 0.1;
    let s = 0.275;
    let mut v = Volume3::filled([n; 3], [h; 3], [0.0; 3], 0.0).unwrap();
    let c = v.index(20, 20, 20);
    v.data_mut()[c] = 1.0;
    let b = gaussian_blur(&v, s).unwrap();
    let norm = h * h * h / (2.0 * std::f64::consts::PI * s * s).powf(1.5);
    for (i, j, k) in [(20, 20, 20), (22, 20, 20), (23, 21, 19), (25, 25, 20), (20, 26, 18)] {
        let r2 = ((i as f64 - 20.0).powi(2) + (j as f64 - 20.0).powi(2) + (k as f64 - 20.0).powi(2)) * h * h;
        let expect = norm * (-r2 / (2.0 * s * s)).exp();
        let got = b.get(i, j, k) as f64;
        assert!(((got - expect) / expect).abs() < 1e-3, "{i},{j},{k}: {got} vs {expect}");
    }
}

#[test]
fn hessian_of_quadratic_is_exact() {
    // f = x^2 + 2 y^2 - z^2 + xy  ->  H = [[2,1,0],[1,4,0],[0,0,-2]]
    let v = grid(30, 0.1, |p| {
        let q = p - vec3(1.5, 1.5, 1.5);
        q.x * q.x + 2.0 * q.y * q.y - q.z * q.z + q.x * q.y
    });
    let h = hessian_components(&v, 0.2);
    let i = v.index(15, 15, 15);
    let s2 = 0.04;
    let expect = [2.0, 1.0, 0.0, 4.0, 0.0, -2.0];
    for c in 0..6 {
        assert!((h[c][i] as f64 / s2 - expect[c]).abs() < 1e-2, "component {c}: {}", h[c][i] as f64 / s2);
    }
}

#[test]
fn eigen_solver_matches_known_spectra() {
    let e = symmetric_eigenvalues([2.0, 1.0, 0.0, 2.0, 0.0, -5.0]);
    assert!((e[0] - 1.0).abs() < 1e-12 && (e[1] - 3.0).abs() < 1e-12 && (e[2] + 5.0).abs() < 1e-12);
    let e = symmetric_eigenvalues([-1.0, 0.0, 0.0, 3.0, 0.0, 2.0]);
    assert_eq!(e, [-1.0, 2.0, 3.0]);
}

#[test]
fn filters_vanish_on_constant() {
    let c = Volume3::filled([12, 12, 12], [0.1; 3], [0.0; 3], 1000.0).unwrap();
    assert!(blob_filter(&c, &[0.2], 1000.0, 5000.0, 40000.0).unwrap().data().iter().all(|&x| x == 0.0));
    assert!(vesselness(&c, &[0.2], 0.5, 0.5, 500.0).unwrap().data().iter().all(|&x| x == 0.0));
}

#[test]
fn blob_prefers_blobs_and_vesselness_prefers_tubes() {
    let n = 41;
    let c = vec3(2.0, 2.0, 2.0);
    let bv = grid(n, 0.1, blob(c, 0.3, 3000.0));
    let tv = grid(n, 0.1, tube(vec3(2.0, 2.0, -1.0), vec3(2.0, 2.0, 5.0), 0.3, 3000.0));
    let i = bv.index(20, 20, 20);
    let scales = [0.3];
    let bb = blob_filter(&bv, &scales, 3000.0, 5000.0, 40000.0).unwrap();
    let bt = blob_filter(&tv, &scales, 3000.0, 5000.0, 40000.0).unwrap();
    assert!(bb.data()[i] > bt.data()[i]);
    let vb = vesselness(&bv, &scales, 0.5, 0.5, 500.0).unwrap();
    let vt = vesselness(&tv, &scales, 0.5, 0.5, 500.0).unwrap();
    assert!(vt.data()[i] > vb.data()[i]);
    // centerline beats wall
    let wall = tv.index(23, 20, 20);
    assert!(vt.data()[i] > vt.data()[wall]);
}

#[test]
fn dark_blob_has_no_blob_response() {
    let v = grid(31, 0.1, |p| 2000.0 - blob(vec3(1.5, 1.5, 1.5), 0.3, 1500.0)(p));
    let b = blob_filter(&v, &[0.3], 2000.0, 5000.0, 40000.0).unwrap();
    assert_eq!(b.data()[v.index(15, 15, 15)], 0.0);
}

#[test]
fn endpoint_filter_continuous_at_origin() {
    let f = EndpointFilter::new(0.3, vec3(0.0, 0.0, 1.0), 0.97).unwrap();
    let w = vec3(0.1, 0.05, 0.0);
    let back = vec3(0.1, 0.05, -1e-12);
    assert!((f.shape(&w) - f.shape(&back)).abs() < 1e-9);
    assert_eq!(f.shape(&Vec3::zeros()), 0.09);
}

#[test]
fn endpoint_zero_volume_and_linearity() {
    let z = Volume3::filled([40; 3], [0.1; 3], [0.0; 3], 0.0).unwrap();
    let f = EndpointFilter::new(0.3, vec3(1.0, 1.0, 0.0), 0.97).unwrap();
    let x = vec3(2.0, 2.0, 2.0);
    assert_eq!(endpoint_response(&z, &x, &f).unwrap(), 0.0);
    let v = grid(40, 0.1, blob(x, 0.3, 100.0));
    let v4 = v.with_data(v.data().iter().map(|a| a * 4.0).collect()).unwrap();
    let r1 = endpoint_response(&v, &x, &f).unwrap();
    let r4 = endpoint_response(&v4, &x, &f).unwrap();
    assert!((r4 - 4.0 * r1).abs() < 1e-9 * r4.abs());
    assert!(endpoint_response(&v, &vec3(0.2, 2.0, 2.0), &f).is_err());
}
