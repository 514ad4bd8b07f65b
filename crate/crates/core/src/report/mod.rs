//! Metrics, resampling drift diagnostics and report files.

mod drift;
mod emit;
mod metrics;

pub use drift::{drift_diagnostics, total_variation, DriftReport, FieldDrift};
pub use emit::{
    confusion_csv, emit_report, load_report, render_markdown, render_summary, EvalReport, ReportFormat, ALL_FORMATS,
    REPORT_VERSION,
};
pub(crate) use emit::write_file;
pub use metrics::{classification_metrics, confusion_matrix, ClassMetrics, ConfusionMatrix, Metrics};
