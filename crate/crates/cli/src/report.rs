//! Rendering of prediction records, grid tables and comparison reports.

use std::fmt::Write as _;

use cpens_core::evaluation::{CellKey, CvResult, FoldId, GridResult, Summary};
use cpens_core::{EnsembleVerdict, Outcome};
use serde_json::json;

use crate::error::CliResult;

pub const UNPREDICTABLE: &str = "UNPREDICTABLE";

fn feature_list(names: &[String]) -> String {
    format!("[{}]", names.join(", "))
}

fn trustworthy_pct(v: &EnsembleVerdict) -> String {
    format!("{}%", (v.trustworthy_fraction * 100.0).round() as u32)
}

/// Per-example CSV: id, trustworthy share, outcome, credibility, confidence, frequent features.
pub fn predictions_csv(verdicts: &[EnsembleVerdict], classes: &[String]) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "id",
        "trustworthy_pct",
        "prediction",
        "credibility",
        "confidence",
        "frequent_features",
    ])
    .map_err(cpens_core::Error::from)?;
    let three = |x: Option<f64>| x.map_or(String::new(), |x| format!("{x:.3}"));
    for v in verdicts {
        let prediction = match v.outcome {
            Outcome::Predicted(l) => classes[l.0].as_str(),
            Outcome::Unpredictable => UNPREDICTABLE,
        };
        w.write_record([
            v.example_id.as_str(),
            &trustworthy_pct(v),
            prediction,
            &three(v.mean_credibility),
            &three(v.mean_confidence),
            &feature_list(&v.frequent_features),
        ])
        .map_err(cpens_core::Error::from)?;
    }
    Ok(w.into_inner().expect("in-memory writer does not fail"))
}

/// One JSON object per line, at full precision.
pub fn predictions_jsonl(verdicts: &[EnsembleVerdict], classes: &[String]) -> Vec<u8> {
    let mut out = String::new();
    for v in verdicts {
        let votes: serde_json::Map<String, serde_json::Value> = classes
            .iter()
            .zip(&v.vote_counts)
            .map(|(c, &n)| (c.clone(), json!(n)))
            .collect();
        let record = json!({
            "id": v.example_id,
            "trustworthy_fraction": v.trustworthy_fraction,
            "prediction": v.outcome.label().map(|l| classes[l.0].clone()),
            "unpredictable": v.outcome == Outcome::Unpredictable,
            "credibility": v.mean_credibility,
            "confidence": v.mean_confidence,
            "frequent_features": v.frequent_features,
            "votes": votes,
        });
        out.push_str(&record.to_string());
        out.push('\n');
    }
    out.into_bytes()
}

fn pm(s: Option<Summary>) -> String {
    s.map_or("-".to_string(), |s| format!("{:.3}±{:.3}", s.mean, s.sd))
}

pub fn describe_cell(k: &CellKey) -> String {
    let threshold = k.threshold.map_or("none".to_string(), |t| format!("{t}"));
    format!(
        "{} {} n={} ff={} threshold={}",
        k.base_mode,
        k.sampling.as_str(),
        k.n_estimators,
        k.feature_fraction,
        threshold
    )
}

/// Human-readable grid table at three decimals, with the best cell by mean F-measure.
pub fn grid_summary(grid: &GridResult) -> String {
    let mut out = String::new();
    let folds = grid.cells.first().map_or(0, |c| c.report.n_iterations);
    let _ = writeln!(out, "{} cells, {} fold evaluations each", grid.cells.len(), folds);
    let _ = writeln!(
        out,
        "{:<10} {:<9} {:>4} {:>5} {:>9}  {:<13} {:<13} {:<13} {:<15}",
        "mode", "sampling", "n", "ff", "threshold", "F-measure", "specificity", "sensitivity", "empty %"
    );
    for cell in &grid.cells {
        let k = &cell.key;
        let r = &cell.report;
        let _ = writeln!(
            out,
            "{:<10} {:<9} {:>4} {:>5} {:>9}  {:<13} {:<13} {:<13} {:<15}",
            k.base_mode.as_str(),
            k.sampling.as_str(),
            k.n_estimators,
            k.feature_fraction,
            k.threshold.map_or("none".to_string(), |t| format!("{t}")),
            pm(r.f_measure),
            pm(r.specificity),
            pm(r.sensitivity),
            format!("{:.3}±{:.3}", r.empty_rate_pct.mean, r.empty_rate_pct.sd),
        );
    }
    match grid.best_by_f_measure() {
        Some(best) => {
            let _ = writeln!(
                out,
                "best by mean F-measure: {} (F {})",
                describe_cell(&best.key),
                pm(best.report.f_measure)
            );
        }
        None => out.push_str("best by mean F-measure: none (no cell made a prediction)\n"),
    }
    out
}

/// Paired per-iteration F-measures, one column per configuration.
pub fn paired_table(names: &[String], results: &[CvResult], ids: &[FoldId]) -> String {
    let mut out = String::from("repeat,fold");
    for n in names {
        out.push(',');
        out.push_str(&csv_field(n));
    }
    out.push('\n');
    for (i, id) in ids.iter().enumerate() {
        let _ = write!(out, "{},{}", id.repeat, id.fold);
        for r in results {
            match r.folds[i].f_measure {
                Some(f) => {
                    let _ = write!(out, ",{f}");
                }
                None => out.push(','),
            }
        }
        out.push('\n');
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
