//! Text and JSON rendering. Losses print with 4 decimals, percentages with 2.

use std::fmt::Write;

use cliptbp::gradcheck::{LossKind, SuiteReport};
use cliptbp::losses::LossComponents;
use cliptbp::metrics::EvalResult;
use cliptbp::toy::TraceRow;

fn rows(result: &EvalResult) -> Vec<(String, f64)> {
    let mut out: Vec<(String, f64)> = result.r1_at.iter().map(|(t, v)| (format!("R1@{t}"), *v)).collect();
    out.extend(result.map_at.iter().map(|(t, v)| (format!("mAP@{t}"), *v)));
    out.push(("mAP@Avg".to_string(), result.map_avg));
    out
}

pub fn eval_table(result: &EvalResult) -> String {
    let rows = rows(result);
    let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0).max("queries".len());
    let mut out = String::new();
    for (k, v) in rows {
        writeln!(out, "{k:<width$}  {v:>6.2}").unwrap();
    }
    writeln!(out, "{:<width$}  {:>6}", "queries", result.num_queries).unwrap();
    out
}

fn json_table(pairs: &[(f64, f64)]) -> String {
    let body: Vec<String> = pairs.iter().map(|(t, v)| format!("\"{t}\": {v:.2}")).collect();
    format!("{{{}}}", body.join(", "))
}

/// Hand-rendered so percentages keep exactly two decimals.
pub fn eval_json(result: &EvalResult) -> String {
    format!(
        "{{\n  \"num_queries\": {},\n  \"r1\": {},\n  \"map\": {},\n  \"map_avg\": {:.2}\n}}\n",
        result.num_queries,
        json_table(&result.r1_at),
        json_table(&result.map_at),
        result.map_avg
    )
}

pub fn gradcheck_table(report: &SuiteReport) -> String {
    let mut out = String::new();
    writeln!(out, "{:<16} {:>7} {:>7} {:>12} {:>12}", "loss", "passed", "trials", "max_rel", "max_abs").unwrap();
    for kind in LossKind::ALL {
        let outcomes: Vec<_> = report.of_kind(kind).collect();
        let passed = outcomes.iter().filter(|o| o.report.passed).count();
        let max_rel = outcomes.iter().map(|o| o.report.max_rel_error).fold(0.0, f64::max);
        let max_abs = outcomes.iter().map(|o| o.report.max_abs_error).fold(0.0, f64::max);
        writeln!(
            out,
            "{:<16} {:>7} {:>7} {:>12.4e} {:>12.4e}",
            kind.name(),
            passed,
            outcomes.len(),
            max_rel,
            max_abs
        )
        .unwrap();
    }
    writeln!(out, "{}", if report.passed() { "PASS" } else { "FAIL" }).unwrap();
    out
}

pub fn loss_table(c: &LossComponents, total: f64) -> String {
    let mut out = String::new();
    for (name, v) in [
        ("basic", c.basic),
        ("clip", c.clip),
        ("boundary", c.boundary),
        ("aux", c.aux),
        ("total", total),
    ] {
        writeln!(out, "{name:<9} {v:.4}").unwrap();
    }
    out
}

pub fn trace_csv(trace: &[TraceRow]) -> String {
    let mut out = String::from("step,basic,clip,boun,b_aux,total\n");
    for r in trace {
        let c = r.components;
        writeln!(
            out,
            "{},{:.4},{:.4},{:.4},{:.4},{:.4}",
            r.step, c.basic, c.clip, c.boundary, c.aux, r.total
        )
        .unwrap();
    }
    out
}
