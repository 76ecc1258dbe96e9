//! LSTM encoder-decoder over circuit token sequences, written directly on
//! `ndarray` with explicit backpropagation through time.

pub mod layers;
pub mod model;
pub mod optim;
pub mod train;
pub mod translate;

use thiserror::Error;

use crate::encode::EncodeError;

pub use model::{Batch, Example, Model, ModelConfig, Variant};
pub use optim::{Optimizer, OptimizerConfig, OptimizerKind};
pub use train::{evaluate, train, Checkpoint, EpochStats, Evaluation, TrainConfig, TrainHistory};
pub use translate::{translate, translate_tokens, TargetMeta, Translation};

#[derive(Debug, Error)]
pub enum Seq2SeqError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("loss became non-finite in epoch {epoch}; last good epoch {last_good}")]
    Diverged { epoch: usize, last_good: usize },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("prediction is empty")]
    EmptyCircuit,
    #[error("cannot repair prediction ({reason}); raw tokens {tokens:?}")]
    Unrepairable { reason: String, tokens: Vec<u32> },
    #[error(transparent)]
    Encode(#[from] EncodeError),
}
