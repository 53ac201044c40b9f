//! Statistics checked against values produced by an independent reference
//! statistics package (fixture `stats_reference.json`).

mod common;

use headscope_core::analytics::{ks_two_sample, skewness};
use serde_json::Value;

fn fixtures() -> Value {
    let raw = std::fs::read_to_string(common::fixture("stats_reference.json")).unwrap();
    serde_json::from_str(&raw).unwrap()
}

fn floats(v: &Value) -> Vec<f64> {
    v.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()
}

#[test]
fn skewness_matches_reference() {
    let f = fixtures();
    let case = &f["skewness_50"];
    let got = skewness(&floats(&case["values"])).unwrap();
    let want = case["skewness"].as_f64().unwrap();
    assert!((got - want).abs() <= 1e-9, "{got} vs {want}");
}

#[test]
fn ks_matches_reference() {
    let f = fixtures();
    for name in ["ks_40_60", "ks_30_30"] {
        let case = &f[name];
        let r = ks_two_sample(&floats(&case["a"]), &floats(&case["b"])).unwrap();
        let d = case["d"].as_f64().unwrap();
        let p = case["p_asymptotic"].as_f64().unwrap();
        assert_eq!(r.statistic, d, "{name}");
        assert!((r.p_value - p).abs() <= 0.05 * p, "{name}: {} vs {p}", r.p_value);
    }
}

#[test]
fn ablation_report_matches_reference_ks() {
    use headscope_core::ablation_lab::{ablation_report, AblationRecord};
    use headscope_core::{HeadId, NeuronHandle};

    let f = fixtures();
    let case = &f["ks_30_30"];
    let rec = |active: bool, delta: f64| AblationRecord {
        neuron: NeuronHandle::new(11, 0),
        token_id: 0,
        head: HeadId::new(0, 0),
        prompt_id: String::new(),
        head_was_active: active,
        prob_original: 0.5,
        prob_ablated: 0.5 - delta,
        delta,
        neuron_act_original: 0.0,
        neuron_act_ablated: 0.0,
    };
    let records = floats(&case["a"])
        .into_iter()
        .map(|d| rec(true, d))
        .chain(floats(&case["b"]).into_iter().map(|d| rec(false, d)))
        .collect();
    let report = ablation_report(records).unwrap();
    let d = case["d"].as_f64().unwrap();
    let p = case["p_asymptotic"].as_f64().unwrap();
    assert!((report.ks_statistic - d).abs() <= 1e-6);
    assert!((report.ks_p_value - p).abs() <= 0.05 * p);
}
