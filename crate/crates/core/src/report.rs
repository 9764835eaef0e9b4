//! Canonical JSON rendering of an [`EvalReport`].
//!
//! Object keys are sorted, reals are rounded to six significant digits, and
//! undefined metrics are written as `null`, so identical inputs always give
//! byte-identical documents.

use serde_json::{json, Map, Value};

use crate::eval::EvalReport;

/// Rounds to six significant digits.
pub fn round_sig6(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.5e}").parse().expect("formatted float")
}

fn real(x: Option<f64>) -> Value {
    match x {
        Some(v) => json!(round_sig6(v)),
        None => Value::Null,
    }
}

/// Builds the report document. `nms_iou` is echoed under `config` when the
/// detections went through suppression.
pub fn report_value(report: &EvalReport, nms_iou: Option<f64>) -> Value {
    let per_class: Vec<Value> = report
        .per_class
        .iter()
        .map(|c| {
            json!({
                "name": c.name,
                "ap50": real(c.ap50()),
                "ap5095": real(c.ap5095()),
                "tp": c.tp,
                "fp": c.fp,
                "fn": c.fn_,
            })
        })
        .collect();
    let mut config = Map::new();
    config.insert("conf".into(), json!(round_sig6(report.conf_threshold)));
    if let Some(t) = nms_iou {
        config.insert("nms_iou".into(), json!(round_sig6(t)));
    }
    json!({
        "map50": real(report.map50),
        "map5095": real(report.map5095),
        "precision": real(report.precision),
        "recall": real(report.recall),
        "per_class": per_class,
        "config": config,
    })
}

/// Pretty-printed canonical document with a trailing newline.
pub fn report_json(report: &EvalReport, nms_iou: Option<f64>) -> String {
    let mut s = serde_json::to_string_pretty(&report_value(report, nms_iou)).expect("json");
    s.push('\n');
    s
}
