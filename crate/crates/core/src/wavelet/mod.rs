//! Periodized multilevel discrete wavelet transforms over tensors.
//!
//! Signals are zero-padded to a multiple of `2^level` and then filtered
//! circularly, so every analysis step is an orthogonal map and the
//! inverse is its transpose. Both directions are recorded on the autograd
//! tape.

mod check;
mod dwt;
mod filters;

pub use dwt::{
    analysis_step, coarsest_len, dwt1d, dwt2d, idwt1d, idwt2d, max_level, padded_len,
    synthesis_step, DwtCoeffs, DwtCoeffs2d,
};
pub use check::{self_check, CheckReport};
pub use filters::WaveletFilter;

use crate::tensor::TensorError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum WaveletError {
    #[error("unknown wavelet {0:?} (supported: db1..db8, haar)")]
    UnknownWavelet(String),
    #[error("invalid filter {0}")]
    InvalidFilter(String),
    #[error("level {level} is too deep for length {len}; maximum level is {max}")]
    LevelTooDeep { level: usize, len: usize, max: usize },
    #[error("level must be at least 1")]
    ZeroLevel,
    #[error("signal length {len} is shorter than filter length {filter_len}")]
    SignalTooShort { len: usize, filter_len: usize },
    #[error("coefficients were produced by {coeffs} but {filter} was supplied")]
    FilterMismatch { coeffs: String, filter: String },
    #[error("inconsistent coefficients: {0}")]
    Inconsistent(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

pub type Result<T> = std::result::Result<T, WaveletError>;

