use cochlea_core::geom::*;

#[test]
fn segment_distance_cases() {
    let a = vec3(0.0, 0.0, 0.0);
    let b = vec3(1.0, 0.0, 0.0);
    assert!((point_segment_distance(&vec3(0.5, 1.0, 0.0), &a, &b) - 1.0).abs() < 1e-15);
    assert!((point_segment_distance(&vec3(2.0, 0.0, 0.0), &a, &b) - 1.0).abs() < 1e-15);
    assert_eq!(point_segment_distance(&vec3(3.0, 4.0, 0.0), &a, &a), 5.0);
}

#[test]
fn uniform_resampling_keeps_endpoints() {
    let line = vec![vec3(0.0, 0.0, 0.0), vec3(1.0, 0.0, 0.0), vec3(1.0, 1.0, 0.0)];
    let r = resample_uniform(&line, 0.1);
    assert_eq!(r.len(), 21);
    assert_eq!(r[0], line[0]);
    assert_eq!(r[20], line[2]);
    assert!((polyline_length(&r) - 2.0).abs() < 1e-12);
}

#[test]
fn smoothing_pins_endpoints() {
    let line: Vec<Vec3> = (0..10).map(|i| vec3(i as f64, (i % 2) as f64, 0.0)).collect();
    let s = smooth_polyline(&line, 2);
    assert_eq!(s[0], line[0]);
    assert_eq!(s[9], line[9]);
    assert!((s[4].y - 0.4).abs() < 1e-12);
}
