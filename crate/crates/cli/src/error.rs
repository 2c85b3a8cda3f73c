use std::fmt;

use uwno_core::bias::BiasError;
use uwno_core::data::container::ContainerError;
use uwno_core::data::DataError;
use uwno_core::model::ModelError;
use uwno_core::plot::PlotError;
use uwno_core::tensor::TensorError;
use uwno_core::train::TrainError;
use uwno_core::wavelet::WaveletError;

/// Process exit codes.
pub const USAGE: u8 = 2;
pub const IO: u8 = 3;
pub const NUMERIC: u8 = 4;
pub const SHAPE: u8 = 5;
pub const PROPERTY: u8 = 6;

/// An error carrying the exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn new(code: u8, message: impl Into<String>) -> CliError {
        CliError {
            code,
            message: message.into(),
        }
    }

    pub fn usage(message: impl Into<String>) -> CliError {
        CliError::new(USAGE, message)
    }

    pub fn io(path: &std::path::Path, err: impl fmt::Display) -> CliError {
        CliError::new(IO, format!("{}: {err}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

pub type CliResult<T> = Result<T, CliError>;

fn tensor_code(e: &TensorError) -> u8 {
    match e {
        TensorError::ShapeMismatch { .. } => SHAPE,
        _ => USAGE,
    }
}

impl From<ContainerError> for CliError {
    fn from(e: ContainerError) -> CliError {
        CliError::new(IO, e.to_string())
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> CliError {
        let code = match &e {
            DataError::Invalid(_) => USAGE,
            DataError::Solver(_) => NUMERIC,
            DataError::Malformed(_) | DataError::Container(_) | DataError::Io { .. } => IO,
        };
        CliError::new(code, e.to_string())
    }
}

fn model_code(e: &ModelError) -> u8 {
    match e {
        ModelError::Config(_) | ModelError::Wavelet(_) => USAGE,
        ModelError::Shape(_) => SHAPE,
        ModelError::Tensor(t) => tensor_code(t),
        ModelError::Checkpoint(_) | ModelError::Container(_) => IO,
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> CliError {
        CliError::new(model_code(&e), e.to_string())
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> CliError {
        let code = match &e {
            TrainError::Config(_) | TrainError::EmptySplit => USAGE,
            TrainError::ZeroTarget { .. } | TrainError::NonFinite { .. } => NUMERIC,
            TrainError::Model(m) => model_code(m),
            TrainError::Tensor(t) => tensor_code(t),
            TrainError::Io { .. } => IO,
        };
        CliError::new(code, e.to_string())
    }
}

impl From<WaveletError> for CliError {
    fn from(e: WaveletError) -> CliError {
        CliError::new(USAGE, e.to_string())
    }
}

impl From<BiasError> for CliError {
    fn from(e: BiasError) -> CliError {
        let code = match &e {
            BiasError::NonFinite(_) => NUMERIC,
            _ => USAGE,
        };
        CliError::new(code, e.to_string())
    }
}

impl From<PlotError> for CliError {
    fn from(e: PlotError) -> CliError {
        CliError::new(USAGE, e.to_string())
    }
}
