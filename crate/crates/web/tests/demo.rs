//! The demo exports, called natively.

use serde_json::Value;

use raychan_web::{fresnel_curve, lab_sweep, material_names, trace_lab};

fn parse(s: &str) -> Value {
    serde_json::from_str(s).unwrap()
}

#[test]
fn trace_view_has_los_and_geometry() {
    let v = parse(&trace_lab(2.0, 8.0, 28.0, 2));
    assert!(v.get("error").is_none(), "{v}");
    assert_eq!(v["room"], serde_json::json!([7.6, 10.5, 3.1]));
    assert_eq!(v["los"], true);
    let paths = v["paths"].as_array().unwrap();
    assert!(paths.len() > 1);
    assert_eq!(paths[0]["kind"], "los");
    // LoS delay is the straight-line distance over c
    let d = ((4.8f64 - 2.0).powi(2) + (2.4f64 - 8.0).powi(2) + 0.5f64.powi(2)).sqrt();
    let delay = paths[0]["delay_ns"].as_f64().unwrap();
    assert!((delay - d / 0.299_792_458).abs() < 1e-9);
    for p in paths {
        let order = p["order"].as_u64().unwrap() as usize;
        assert_eq!(p["points"].as_array().unwrap().len(), order + 2);
        assert!(order <= 2);
    }
    // every kept path is within 40 dB of the strongest
    let powers: Vec<f64> = paths.iter().map(|p| p["power_db"].as_f64().unwrap()).collect();
    let top = powers.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    assert!(powers.iter().all(|p| top - p <= 40.0 + 1e-9));
}

#[test]
fn bad_inputs_come_back_as_error_objects() {
    assert!(parse(&trace_lab(50.0, 8.0, 28.0, 2)).get("error").is_some());
    assert!(parse(&trace_lab(2.0, 8.0, 0.1, 2)).get("error").is_some());
    assert!(parse(&fresnel_curve("cheese", 10.0)).get("error").is_some());
}

#[test]
fn fresnel_curve_limits() {
    let v = parse(&fresnel_curve("concrete", 10.0));
    let te = v["te"].as_array().unwrap();
    let tm = v["tm"].as_array().unwrap();
    assert_eq!(te.len(), 91);
    let at = |a: &Vec<Value>, i: usize| a[i].as_f64().unwrap();
    // same magnitude at normal incidence, total reflection at grazing
    assert!((at(te, 0) - at(tm, 0)).abs() < 1e-12);
    assert!((at(te, 90) - 1.0).abs() < 1e-9);
    // Brewster dip: TM dips below TE somewhere in between
    let min_tm = (0..91).map(|i| at(tm, i)).fold(f64::INFINITY, f64::min);
    assert!(min_tm < 0.2 * at(te, 60));
}

#[test]
fn materials_are_listed() {
    let v = parse(&material_names());
    let names: Vec<&str> = v.as_array().unwrap().iter().map(|n| n.as_str().unwrap()).collect();
    assert!(names.contains(&"concrete") && names.contains(&"glass"));
}

#[test]
fn sweep_points_follow_the_sizes() {
    let v = parse(&lab_sweep(2.0, 8.0, 10.0, 5));
    let rows = v.as_array().unwrap();
    let n: Vec<u64> = rows.iter().map(|r| r["n_tx"].as_u64().unwrap()).collect();
    assert_eq!(n, [4, 9, 16, 25]);
    for r in rows {
        let rank = r["mean_rank"].as_f64().unwrap();
        assert!((1.0..=9.0).contains(&rank));
    }
}
