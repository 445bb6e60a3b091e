use alloc::string::String;

/// Errors raised by the core crate.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("index {index} out of range for length {len}")]
    Index { index: usize, len: usize },
    #[error("mask selects no entries")]
    Mask,
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("no sub-question available: {0}")]
    EmptyPool(String),
    #[error("distributions have different supports: {0}")]
    Support(String),
    #[error("cannot split {0} samples into train/dev/test")]
    Split(usize),
    #[error("training diverged at epoch {epoch}: loss is {loss}")]
    Divergence { epoch: usize, loss: f64 },
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
