use qclimit_web::{spectrum, weak_norm, weyl_sweep};
use serde_json::Value;

fn parse(s: String) -> Value {
    serde_json::from_str(&s).unwrap()
}

#[test]
fn weak_norm_reports_exact_value() {
    let v = parse(weak_norm(32));
    assert!(v["relative_error"].as_f64().unwrap() < 0.1, "{v}");
    assert!(parse(weak_norm(1)).get("error").is_some());
}

#[test]
fn coherent_weyl_error_is_first_order() {
    let v = parse(weyl_sweep(false, 0.8, 0.2, 0.8, 0.1, 4));
    let fit = v["fits"].as_array().unwrap().iter().find(|f| f["metric"] == "weyl_error").unwrap();
    assert!(fit["order"].as_f64().unwrap() > 0.8, "{fit}");
}

#[test]
fn spectrum_approaches_limit() {
    let near = parse(spectrum(true, 0.8, 0.2, 0.01, 1.0, 3));
    let far = parse(spectrum(true, 0.8, 0.2, 0.2, 1.0, 3));
    let gap = |v: &Value| (v["at_epsilon"][0].as_f64().unwrap() - v["limit"][0].as_f64().unwrap()).abs();
    assert!(gap(&near) < gap(&far), "{near} {far}");
    assert!(parse(spectrum(false, 0.8, 0.2, 0.1, 1.0, 0)).get("error").is_some());
}
