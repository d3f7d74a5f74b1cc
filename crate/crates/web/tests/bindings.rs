use polydiv_web::{catalog_json, element_json, validate_json};
use serde_json::Value;

const HEXAGON: &str = "[[0.5,0.05],[0.9,0.25],[0.9,0.7],[0.5,0.95],[0.1,0.7],[0.1,0.25]]";

#[test]
fn catalog_lists_shapes() {
    let v: Value = serde_json::from_str(&catalog_json()).unwrap();
    assert!(v.as_array().unwrap().iter().any(|s| s["key"] == "fig165"));
}

#[test]
fn validation_flags_collinear_normals() {
    let bad: Value = serde_json::from_str(&validate_json("[[0.2,0],[1,0.2],[0.6,0.6],[-0.2,0.4]]", "Ia", 1.0, 1.0).unwrap()).unwrap();
    assert_eq!(bad["admissible"], false);
    let good: Value = serde_json::from_str(&validate_json("[[0.2,0],[1,0.2],[0,1]]", "IIb", 1.0, 1.0).unwrap()).unwrap();
    assert_eq!(good["admissible"], true);
    assert!(validate_json("not json", "IIb", 1.0, 1.0).is_err());
}

#[test]
fn element_reports_traces() {
    let v: Value = serde_json::from_str(&element_json("[[0.2,0],[1,0.2],[0,1]]", "reduced", "IIb", 1, 12.0).unwrap()).unwrap();
    assert_eq!(v["dimension"], 9);
    assert_eq!(v["traces"].as_array().unwrap().len(), 6);
    assert!(v["cond2"].as_f64().unwrap() > 1.0);
    assert!(element_json(HEXAGON, "classical", "IIb", 3, 12.0).is_err());
}
