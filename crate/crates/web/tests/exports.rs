use serde_json::Value;

fn parse(s: String) -> Value {
    serde_json::from_str(&s).expect("exports return JSON")
}

#[test]
fn sweep_reports_one_row_per_algorithm() {
    let v = parse(hrrp_web::success_sweep(3, 11));
    assert!(v.get("error").is_none(), "{v}");
    assert_eq!(v["snrs"].as_array().unwrap().len(), 5);
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    for r in rows {
        for p in r["success"].as_array().unwrap() {
            let p = p.as_f64().unwrap();
            assert!((0.0..=1.0).contains(&p));
        }
    }
}

#[test]
fn same_inputs_give_same_profile() {
    let a = hrrp_web::recover_srp(15.0, 30, 4, 9, "omp-sd");
    let b = hrrp_web::recover_srp(15.0, 30, 4, 9, "omp-sd");
    assert_eq!(a, b);
    let v = parse(a);
    assert_eq!(v["algorithm"], "omp-sd");
    assert_eq!(v["pulses"].as_array().unwrap().len(), 30);
}

#[test]
fn too_many_pulses_is_an_error() {
    let v = parse(hrrp_web::recover_srp(f64::INFINITY, 301, 1, 1, "omp"));
    assert!(v["error"].as_str().unwrap().contains("301"));
}
