//! Dense `f64` tensors, a reverse-mode tape, parameter storage, AdaDelta,
//! inverted dropout and a finite-difference gradient checker.

mod adadelta;
mod checkpoint;
mod dropout;
pub mod gradcheck;
mod params;
mod tape;
mod tensor;

pub use adadelta::{adadelta_step, AdaDeltaState, DEFAULT_EPSILON, DEFAULT_RHO};
pub use checkpoint::{ParamCheckpoint, ParamRecord, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use dropout::{dropout_mask, mix_seed};
pub use params::{Gradients, ParamId, ParamStore};
pub use tape::{sigmoid, softmax, Tape, Var};
pub use tensor::Tensor;

use thiserror::Error;

#[derive(Clone, Debug, Error, PartialEq)]
pub enum NumError {
    #[error("{op}: shape mismatch between {left:?} and {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("loss must be a scalar, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
    #[error("invalid shape {0:?}")]
    InvalidShape(Vec<usize>),
    #[error("shape {shape:?} needs {} values, got {len}", .shape.iter().product::<usize>())]
    DataLength { shape: Vec<usize>, len: usize },
    #[error("row {row} out of range for table of shape {shape:?}")]
    RowOutOfRange { row: usize, shape: Vec<usize> },
    #[error("target class {target} out of range for {len} classes")]
    TargetOutOfRange { target: usize, len: usize },
    #[error("{0}: no inputs")]
    EmptyInput(&'static str),
    #[error("parameter {0:?} already exists")]
    DuplicateParam(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}
