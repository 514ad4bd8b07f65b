use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::drift::DriftReport;
use super::metrics::{ConfusionMatrix, Metrics};
use crate::error::{Error, Result};
use crate::resample::ResampleStats;
use crate::tabular::{LABEL_LEVELS, NUM_CLASSES};
use crate::train::TrainHistory;

pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub report_version: u32,
    /// Display name, e.g. "ARM-Net".
    pub model: String,
    pub metrics: Metrics,
    pub confusion: ConfusionMatrix,
    /// Epochs actually run.
    pub epochs: usize,
    pub early_stopped: bool,
    /// Per-class sample counts of the (resampled) modeling dataset.
    pub samples: [usize; NUM_CLASSES],
    pub history: TrainHistory,
    pub resample: Option<ResampleStats>,
    pub drift: Option<DriftReport>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Json,
    Csv,
    Markdown,
}

pub const ALL_FORMATS: [ReportFormat; 3] = [ReportFormat::Json, ReportFormat::Csv, ReportFormat::Markdown];

fn pct(v: f64) -> String {
    format!("{v:.0}")
}

fn epochs_cell(r: &EvalReport) -> String {
    if r.early_stopped {
        format!("{} (Early Stopping)", r.epochs)
    } else {
        r.epochs.to_string()
    }
}

fn summary_table(out: &mut String, reports: &[&EvalReport]) {
    out.push_str("| Model | Accuracy (%) | Epochs | Samples KA | Samples BC | Samples O |\n");
    out.push_str("|---|---|---|---|---|---|\n");
    for r in reports {
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {} | {} |",
            r.model,
            pct(r.metrics.accuracy),
            epochs_cell(r),
            r.samples[0],
            r.samples[1],
            r.samples[2]
        );
    }
}

fn class_table(out: &mut String, reports: &[&EvalReport]) {
    out.push_str("| Model | Category | Precision (%) | Recall (%) | F-1 Score (%) | Accuracy (%) |\n");
    out.push_str("|---|---|---|---|---|---|\n");
    for r in reports {
        for (i, m) in r.metrics.per_class.iter().enumerate() {
            let name = if i == 0 { r.model.as_str() } else { "" };
            let _ = writeln!(
                out,
                "| {name} | {} | {} | {} | {} | {} |",
                m.class,
                pct(m.precision),
                pct(m.recall),
                pct(m.f1),
                pct(m.accuracy)
            );
        }
    }
}

pub fn render_markdown(r: &EvalReport) -> String {
    let mut out = format!("# {} evaluation\n\n", r.model);
    summary_table(&mut out, &[r]);
    out.push('\n');
    class_table(&mut out, &[r]);
    out.push_str("\nConfusion matrix (rows: true, columns: predicted)\n\n| | KA | BC | O |\n|---|---|---|---|\n");
    for (c, row) in r.confusion.0.iter().enumerate() {
        let _ = writeln!(out, "| {} | {} | {} | {} |", LABEL_LEVELS[c], row[0], row[1], row[2]);
    }
    if let Some(stats) = &r.resample {
        out.push_str("\nResampling (per class)\n\n| Class | Before | After SMOTE | After ENN |\n|---|---|---|---|\n");
        for s in &stats.0 {
            let _ = writeln!(out, "| {} | {} | {} | {} |", s.class, s.before, s.after_smote, s.after_enn);
        }
    }
    if let Some(d) = &r.drift {
        let _ = writeln!(out, "\nMax per-class TV drift from resampling: {:.4}", d.max_per_class());
    }
    out.push_str("\nPer-class accuracy is reported as recall.\n");
    out
}

/// Combined tables for several models.
pub fn render_summary(reports: &[EvalReport]) -> String {
    let refs: Vec<&EvalReport> = reports.iter().collect();
    let mut out = String::from("# Summary\n\n");
    summary_table(&mut out, &refs);
    out.push('\n');
    class_table(&mut out, &refs);
    out.push_str("\nPer-class accuracy is reported as recall.\n");
    out
}

pub fn confusion_csv(cm: &ConfusionMatrix) -> String {
    let mut out = String::from(",KA,BC,O\n");
    for (c, row) in cm.0.iter().enumerate() {
        let _ = writeln!(out, "{},{},{},{}", LABEL_LEVELS[c], row[0], row[1], row[2]);
    }
    out
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Writes `report.json`, `history.csv` + `confusion.csv`, and `report.md` as requested.
pub fn emit_report(r: &EvalReport, out_dir: &Path, formats: &[ReportFormat]) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = Vec::new();
    let mut put = |name: &str, contents: String| -> Result<()> {
        let p = out_dir.join(name);
        write_file(&p, &contents)?;
        written.push(p);
        Ok(())
    };
    for f in formats {
        match f {
            ReportFormat::Json => put("report.json", serde_json::to_string_pretty(r)? + "\n")?,
            ReportFormat::Csv => {
                put("history.csv", r.history.to_csv_string())?;
                put("confusion.csv", confusion_csv(&r.confusion))?;
            }
            ReportFormat::Markdown => put("report.md", render_markdown(r))?,
        }
    }
    Ok(written)
}

pub fn load_report(path: &Path) -> Result<EvalReport> {
    let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let r: EvalReport = serde_json::from_str(&s)?;
    if r.report_version != REPORT_VERSION {
        return Err(Error::Config(format!("unsupported report_version {}", r.report_version)));
    }
    Ok(r)
}
