//! Optimization, early stopping, cross-validation and grid execution.

mod config;
mod grid;
mod model;
mod optim;
mod train;

pub use config::{DemoConfig, ExperimentConfig, GridConfig, HeadParams, SplitConfig};
pub use grid::{
    aggregate_records, collect_records, config_hash, corpus_digest, execute_run, load_grid_corpus, run_grid, run_path,
    train_settings, write_reports, FailedRun, GridOptions, GridOutcome, Manifest, RunContext, RunRecord,
};
pub use model::{prepare_examples, prepare_input, Classifier, PreparedExample};
pub use optim::{simulate_early_stopping, Adam, EarlyStopping, StopDecision};
pub use train::{
    cross_validate, evaluate, fold_seed, partition, select_fold, train_one, CvOutcome, EpochRecord, FoldResult, History,
    TestSet, TrainPool, TrainSettings,
};

use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::corpus::CorpusError;
use crate::embeddings::EmbeddingError;
use crate::encoders::HeadError;
use crate::evaluation::MetricsError;
use crate::taskgen::TaskError;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("training set is empty")]
    EmptyTrainSet,
    #[error("validation set is empty")]
    EmptyValidationSet,
    #[error("test set is empty")]
    EmptyTestSet,
    #[error("training set holds only label {label}")]
    SingleClassTrainSet { label: usize },
    #[error("non-finite loss {loss} at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize, loss: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Head(#[from] HeadError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Task(#[from] TaskError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Writes pretty JSON to a sibling temp file and renames it into place, so
/// readers never see a partial record.
pub fn write_json_atomic<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), TrainError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    std::fs::write(&tmp, serde_json::to_vec_pretty(value)?)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}
