use cochlea_core::result::*;
use cochlea_core::vec3;

#[test]
fn csv_round_trip() {
    let r = LocalizationResult::new("MD1", vec![vec3(1.5, -2.0, 0.1), vec3(0.0, 0.0, 1e-7)], Some(vec![400.0, 12.5]));
    let back = LocalizationResult::from_csv(&r.to_csv(), "MD1").unwrap();
    assert_eq!(back, r);
    assert!(r.to_csv().starts_with("index,x_mm,y_mm,z_mm,doi_deg\n1,"));
    let unknown = LocalizationResult::new("X", vec![vec3(0.0, 0.0, 0.0)], None);
    assert!(LocalizationResult::from_csv(&unknown.to_csv(), "X").unwrap().doi[0].is_nan());
}
