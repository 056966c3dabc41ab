//! Patch classifier: stacked conv → batch-norm → ReLU blocks with max
//! pooling, a dense layer and softmax, trained with momentum SGD.

mod model;
mod network;
pub mod ops;
mod tensor;
mod train;

use thiserror::Error;

pub use model::{image_to_tensor, Classification, Classifier, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use network::{ArchConfig, ConvBlockSpec, Layer, Network, NUM_CLASSES};
pub use tensor::Tensor;
pub use train::{evaluate, sgdm_step, train, LogEntry, Sample, Split, TrainConfig, TrainLog};

#[derive(Debug, Error)]
pub enum CnnError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("tensor contains non-finite values")]
    NonFinite,
    #[error("backward called without a preceding training forward pass")]
    StaleCache,
    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("dataset contains only {0} samples")]
    SingleClassDataset(crate::metrics::Label),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
