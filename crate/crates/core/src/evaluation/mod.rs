//! Weighted classification metrics, run aggregation and report tables.

mod aggregate;
mod metrics;
mod report;

pub use aggregate::{aggregate_runs, AggregateMetrics, Prf};
pub use metrics::{weighted_metrics, ClassMetrics, MetricsTriple};
pub use report::{parse_report_csv, render_report, AggregateRow, CsvRow, Layout, Report, MISSING};

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("label vectors differ in length ({y_true} vs {y_pred})")]
    LengthMismatch { y_true: usize, y_pred: usize },
    #[error("no inputs")]
    EmptyInput,
}
