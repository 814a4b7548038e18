use serde_json::Value;
use uvnet_web::{augment_json, error_json, generate_json, primitive_names};

fn parse(s: String) -> Value {
    serde_json::from_str(&s).unwrap()
}

#[test]
fn generate_reports_faces_labels_and_links() {
    let v = parse(generate_json(r#"{"polygon":{"sides":5}}"#, 3, 6).unwrap());
    assert_eq!(v["nodes"], 7);
    assert_eq!(v["links"].as_array().unwrap().len(), 15);
    let faces = v["faces"].as_array().unwrap();
    assert_eq!(faces.iter().filter(|f| f["label"] == "extrude_end").count(), 2);
    assert!(faces.iter().all(|f| f["samples"] == 36 && !f["points"].as_array().unwrap().is_empty()));
    assert!(generate_json(r#"{"polygon":{"sides":1}}"#, 3, 6).is_err());
    assert!(generate_json("nonsense", 3, 6).is_err());
}

#[test]
fn augment_returns_subgraphs() {
    let fam = r#"{"holed":{"sides":4,"hole_sides":4}}"#;
    for t in ["identity", "patch1", "patch2", "drop_nodes", "drop_edges"] {
        let v = parse(augment_json(fam, 1, 4, t, 9).unwrap());
        assert_eq!(v["original_nodes"], 10);
        assert!(v["nodes"].as_u64().unwrap() >= 1 && v["nodes"].as_u64().unwrap() <= 10);
        if t == "identity" {
            assert_eq!(v["links"].as_array().unwrap().len() as u64, v["original_links"].as_u64().unwrap());
        }
    }
    assert!(augment_json(fam, 1, 4, "shuffle", 9).is_err());
}

#[test]
fn error_table_for_every_primitive() {
    let names: Vec<String> = serde_json::from_str(&primitive_names()).unwrap();
    assert!(names.len() >= 5);
    for n in &names {
        let v = parse(error_json(n, 10, 10).unwrap());
        assert_eq!(v["report"]["surface_chordal"]["exceedance"].as_array().unwrap().len(), 3);
    }
    let cube = parse(error_json("unit_cube", 4, 4).unwrap());
    assert!(cube["report"]["surface_chordal"]["max"].as_f64().unwrap() < 1e-12);
    assert!(error_json("klein_bottle", 4, 4).is_err());
}
