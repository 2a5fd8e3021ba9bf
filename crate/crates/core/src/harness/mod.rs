//! Datasets, synthetic corpora, training and evaluation loops, metrics and
//! dictionary matching.

pub mod dataset;
pub mod dict;
pub mod metrics;
pub mod schema;
pub mod synth;
pub mod train;

use thiserror::Error;

use crate::model::ModelError;
use crate::structreg::CutRuleError;

pub use dataset::{load_dataset, DatasetError, DatasetRecord, LabeledInstance};
pub use metrics::{macro_f1, ConfusionMatrix, Metrics};
pub use schema::{LabelSchema, SchemaError};
pub use synth::{synth_generate, SynthSpec};
pub use train::{evaluate, train, EpochRecord, ExperimentConfig, ModelBundle, TrainOutcome};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error("{0}")]
    Model(#[from] ModelError),
    #[error(transparent)]
    CutRule(#[from] CutRuleError),
    #[error("{0}")]
    Checkpoint(String),
    #[error("instance {id}: {source}")]
    Instance { id: String, source: ModelError },
}

impl HarnessError {
    /// Short name of the failure class, printed by the CLI.
    pub fn category(&self) -> &'static str {
        match self {
            HarnessError::Config(_) | HarnessError::CutRule(_) => "config",
            HarnessError::Io { .. } => "io",
            HarnessError::Dataset(DatasetError::Io { .. }) => "io",
            HarnessError::Dataset(_) => "data",
            HarnessError::Schema(_) => "schema",
            HarnessError::Model(_) | HarnessError::Instance { .. } => "model",
            HarnessError::Checkpoint(_) => "checkpoint",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.category() {
            "config" => 3,
            "io" => 4,
            "data" => 5,
            "schema" => 6,
            "model" => 7,
            _ => 8,
        }
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
