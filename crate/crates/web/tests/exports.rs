use serde_json::Value;
use swag_web::{blend_structure, estimate_heatmap, simulate_losses};

#[test]
fn losses_have_all_estimators() {
    let v: Value = serde_json::from_str(&simulate_losses("he-n", 3, 2, 2, 6, 600, 4).unwrap()).unwrap();
    for k in ["SWAG", "S", "S_p", "K", "K_p"] {
        assert!(v["losses"][k].as_f64().unwrap() >= 0.0, "{k}");
    }
    let w = v["weight_trace"].as_array().unwrap();
    assert!(!w.is_empty());
    assert!(w.iter().all(|x| (0.0..1.0).contains(&x.as_f64().unwrap())));
}

#[test]
fn deterministic_under_seed() {
    let a = simulate_losses("ho-k", 2, 2, 2, 5, 300, 9).unwrap();
    assert_eq!(a, simulate_losses("ho-k", 2, 2, 2, 5, 300, 9).unwrap());
}

#[test]
fn heatmap_shapes() {
    let v: Value = serde_json::from_str(&estimate_heatmap("ho-n", 2, 2, 2, 8, 300, 1).unwrap()).unwrap();
    for k in ["truth", "estimate", "sample"] {
        let m = v[k].as_array().unwrap();
        assert_eq!(m.len(), 4);
        assert!(m.iter().all(|r| r.as_array().unwrap().len() == 4));
    }
}

#[test]
fn blend_endpoints() {
    let v: Value = serde_json::from_str(&blend_structure(2, 2, 0.5, 0.3, 0.6, 1.0).unwrap()).unwrap();
    assert_eq!(v["matrix"][0][1].as_f64().unwrap(), 0.5);
    let v: Value = serde_json::from_str(&blend_structure(2, 2, 0.5, 0.3, 0.6, 0.0).unwrap()).unwrap();
    // Z(2) ⊗ Z(2): entry (0,1) is the row correlation, (0,2) the column one.
    assert!((v["matrix"][0][1].as_f64().unwrap() - 0.3).abs() < 1e-15);
    assert!((v["matrix"][0][2].as_f64().unwrap() - 0.6).abs() < 1e-15);
    assert!(blend_structure(2, 2, 0.5, 0.3, 0.6, 1.5).is_err());
    assert!(simulate_losses("nope", 2, 2, 2, 5, 300, 1).is_err());
}
