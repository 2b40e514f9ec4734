//! Plain-text report files: whitespace-separated columns, one record per
//! line, `#` comments. Easy to plot with anything.

use std::fmt::Write;

use anticipation_core::diagnostics::{OracleResult, RatioReport};
use anticipation_core::trainer::TrainReport;
use anticipation_core::Vocabulary;

use crate::CliError;

pub fn train_report(report: &TrainReport) -> String {
    let mut out = String::from("# epoch train_nll val_nll seconds\n");
    for e in &report.epochs {
        let val = e.val_nll.map_or("nan".to_string(), |v| v.to_string());
        writeln!(out, "{} {} {} {}", e.epoch, e.train_nll, val, e.seconds).unwrap();
    }
    if let Some(best) = report.best_epoch {
        writeln!(out, "# best_epoch {best}").unwrap();
    }
    out
}

pub fn trace(values: &[f64]) -> String {
    let mut out = String::from("# t value\n");
    for (t, v) in values.iter().enumerate() {
        writeln!(out, "{} {}", t + 1, v).unwrap();
    }
    out
}

pub fn ratio(report: &RatioReport) -> String {
    let mut out = String::from("# log_p_unc log_p_con\n");
    writeln!(out, "# slope {} intercept {}", report.slope, report.intercept).unwrap();
    for (x, y) in &report.points {
        writeln!(out, "{x} {y}").unwrap();
    }
    out
}

/// Satisfying sequences with their exact constrained probability.
pub fn oracle(result: &OracleResult, vocab: &Vocabulary) -> String {
    let mut out = String::new();
    writeln!(out, "# alpha {}", result.alpha).unwrap();
    out.push_str("# probability sequence\n");
    for (s, p) in result.sequences.iter().zip(&result.constrained) {
        if *p > 0.0 {
            writeln!(out, "{p} {}", vocab.render(s)).unwrap();
        }
    }
    out
}

/// Reads numeric columns back, skipping comments and blank lines.
pub fn parse_columns(text: &str) -> Result<Vec<Vec<f64>>, CliError> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split_whitespace()
            .map(|f| f.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::failure(format!("line {}: {e}", i + 1)))?;
        rows.push(row);
    }
    Ok(rows)
}
