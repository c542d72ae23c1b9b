//! Post-training compression: magnitude pruning and full-integer int8 quantization.

mod format;
mod prune;
mod quantize;

use thiserror::Error;

pub use format::{model_size_bytes, read_quantized, write_quantized, QUANT_MAGIC};
pub use prune::{prune_magnitude, PruneConfig};
pub use quantize::{
    agreement_rate, quantize, quantized_forward, ActQuant, QuantLayer, QuantTensor, QuantizedModel,
};

#[derive(Debug, Error)]
pub enum QuantError {
    #[error("calibration set is empty")]
    EmptyCalibration,
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("sparsity must be in [0, 1), got {0}")]
    Sparsity(f64),
    #[error(transparent)]
    Net(#[from] crate::nn::NetError),
    #[error("quantized model file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
