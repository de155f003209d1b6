//! Measurement instruments: dataset splitting, classification metrics,
//! inter-annotator agreement, summary screening and funnel tables.

mod dataset;
mod funnel;
mod metrics;
mod screen;
mod split;

pub use dataset::{parse_label, read_annotation_csv, read_labeled_csv};
pub use funnel::{parse_funnel_table, render_funnel_table};
pub use metrics::{cohen_kappa, compute_metrics, raw_agreement, ConfusionMatrix, MetricsReport};
pub use screen::{screen_summary, SummaryFlag};
pub use split::split_train_test;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("need at least {needed} items, got {got}")]
    TooFewItems { needed: usize, got: usize },
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("empty input")]
    EmptyInput,
    #[error("invalid ratio {0}")]
    InvalidRatio(String),
    #[error("invalid CSV: {0}")]
    Csv(String),
}
