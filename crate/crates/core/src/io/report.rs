//! `.mgr` evaluation reports and their plain-text rendering.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::gesture::{GestureClass, NUM_CLASSES, NUM_STATES};
use crate::recognizer::{Calibration, ConfusionMatrix, EvalReport, FoldResult};

pub const FORMAT: &str = "mgr";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldSummary {
    pub test_subject: u32,
    pub val_subject: Option<u32>,
    /// Training facts; absent when a saved checkpoint was evaluated.
    pub best_epoch: Option<usize>,
    pub epochs_run: Option<usize>,
    pub calibration: Calibration,
    pub report: EvalReport,
}

impl FoldSummary {
    pub fn from_result(r: &FoldResult) -> Self {
        Self {
            test_subject: r.fold.test_subject,
            val_subject: r.fold.val_subject,
            best_epoch: Some(r.best_epoch),
            epochs_run: Some(r.log.len()),
            calibration: r.calibration.clone(),
            report: r.report.clone(),
        }
    }
}

/// Deterministic evaluation summary. Wall-clock measurements are kept out
/// of it so that equal runs give equal bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub format: String,
    pub version: u32,
    pub seed: u64,
    pub hidden: usize,
    pub folds: Vec<FoldSummary>,
    /// Confusions summed over folds.
    pub class_confusion: ConfusionMatrix,
    pub state_confusion: ConfusionMatrix,
    /// Per-class recall averaged over the folds where the class occurs.
    pub mean_class_accuracy: Vec<Option<f64>>,
    pub mean_state_accuracy: Vec<Option<f64>>,
    /// Non-adjacent Swipe sub-state errors over all Swipe sub-state frames.
    pub off_tridiagonal_fraction: f64,
}

fn mean_per_index(rows: impl Iterator<Item = Vec<Option<f64>>>, n: usize) -> Vec<Option<f64>> {
    let mut sum = vec![0.0; n];
    let mut count = vec![0usize; n];
    for r in rows {
        for (k, v) in r.into_iter().enumerate() {
            if let Some(v) = v {
                sum[k] += v;
                count[k] += 1;
            }
        }
    }
    (0..n).map(|k| (count[k] > 0).then(|| sum[k] / count[k] as f64)).collect()
}

impl MetricsReport {
    pub fn new(seed: u64, hidden: usize, folds: Vec<FoldSummary>) -> Self {
        let mut class_confusion = ConfusionMatrix::new(NUM_CLASSES);
        let mut state_confusion = ConfusionMatrix::new(NUM_STATES);
        for f in &folds {
            class_confusion.merge(&f.report.class_confusion);
            state_confusion.merge(&f.report.state_confusion);
        }
        let mean_class_accuracy = mean_per_index(folds.iter().map(|f| f.report.per_class_accuracy()), NUM_CLASSES);
        let mean_state_accuracy = mean_per_index(folds.iter().map(|f| f.report.per_state_accuracy()), NUM_STATES);
        Self {
            format: FORMAT.to_string(),
            version: VERSION,
            seed,
            hidden,
            off_tridiagonal_fraction: state_confusion.off_tridiagonal_fraction(NUM_STATES - 1),
            folds,
            class_confusion,
            state_confusion,
            mean_class_accuracy,
            mean_state_accuracy,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Table,
    Json,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or("   -  ".to_string(), |v| format!("{v:6.3}"))
}

fn matrix_table(out: &mut String, m: &ConfusionMatrix, labels: &[String]) {
    let width = labels.iter().map(|l| l.len()).max().unwrap_or(0).max(6);
    write!(out, "{:width$}", "").unwrap();
    for l in labels {
        write!(out, " {:>8}", l).unwrap();
    }
    out.push('\n');
    for (i, row) in m.counts.iter().enumerate() {
        let total: u64 = row.iter().sum();
        write!(out, "{:width$}", labels[i]).unwrap();
        for &c in row {
            if total == 0 {
                write!(out, " {:>8}", "-").unwrap();
            } else {
                write!(out, " {:>8.3}", c as f64 / total as f64).unwrap();
            }
        }
        out.push('\n');
    }
}

/// Renders a report. JSON output is stable-ordered and ends in a newline.
pub fn emit_report(report: &MetricsReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(report).expect("report serializes");
            s.push('\n');
            s
        }
        ReportFormat::Table => {
            let classes: Vec<String> = GestureClass::ALL.iter().map(|g| g.to_string()).collect();
            let states: Vec<String> = (0..NUM_STATES).map(|s| format!("state {s}")).collect();
            let mut out = String::new();
            writeln!(out, "seed {}  hidden {}  folds {}", report.seed, report.hidden, report.folds.len()).unwrap();
            for f in &report.folds {
                writeln!(
                    out,
                    "fold test={} val={} best_epoch={} tau={:.4} ece {:.4} -> {:.4}",
                    f.test_subject,
                    f.val_subject.map_or("-".to_string(), |v| v.to_string()),
                    f.best_epoch.map_or("-".to_string(), |v| v.to_string()),
                    f.calibration.temperature,
                    f.report.ece_before,
                    f.report.ece_after,
                )
                .unwrap();
            }
            out.push_str("\nclass accuracy (mean over folds)\n");
            for (name, acc) in classes.iter().zip(&report.mean_class_accuracy) {
                writeln!(out, "  {name:10} {}", fmt_opt(*acc)).unwrap();
            }
            out.push_str("\nstate accuracy (mean over folds)\n");
            for (name, acc) in states.iter().zip(&report.mean_state_accuracy) {
                writeln!(out, "  {name:10} {}", fmt_opt(*acc)).unwrap();
            }
            writeln!(out, "  off-tridiagonal fraction {:.4}", report.off_tridiagonal_fraction).unwrap();
            out.push_str("\nclass confusion (rows: truth, normalized)\n");
            matrix_table(&mut out, &report.class_confusion, &classes);
            out.push_str("\nstate confusion (rows: truth, normalized)\n");
            matrix_table(&mut out, &report.state_confusion, &states);
            out
        }
    }
}

pub fn write_report(report: &MetricsReport, path: &std::path::Path) -> Result<(), super::IoError> {
    super::write_atomic(path, emit_report(report, ReportFormat::Json).as_bytes())
}

pub fn read_report(path: &std::path::Path) -> Result<MetricsReport, super::IoError> {
    let text = std::fs::read_to_string(path)?;
    let r: MetricsReport = serde_json::from_str(&text).map_err(|e| super::IoError::Header(e.to_string()))?;
    if r.version != VERSION || r.format != FORMAT {
        return Err(super::IoError::VersionMismatch {
            found: r.version,
            expected: VERSION,
        });
    }
    Ok(r)
}
