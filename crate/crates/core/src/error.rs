use std::io;
use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum So3Error {
    #[error("matrix is numerically singular (smallest Gram eigenvalue {min_eigenvalue:e})")]
    SingularInput { min_eigenvalue: f64 },
    #[error("matrix has non-finite entries")]
    NonFinite,
    #[error("orthogonalized matrix is a reflection")]
    Reflection,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FilterError {
    #[error("non-monotonic timestamp: dt = {dt} s")]
    NonMonotonicTime { dt: f64 },
    #[error("sample interval {dt} s exceeds the {max} s limit")]
    DtTooLarge { dt: f64, max: f64 },
    #[error("updated gravity vector collapsed (norm {norm:e})")]
    DegenerateGravity { norm: f64 },
    #[error("triad vectors are parallel (|g x m| = {cross_norm:e})")]
    DegenerateTriad { cross_norm: f64 },
    #[error("gain {value} outside [0, 1]")]
    GainOutOfRange { value: f64 },
    #[error(transparent)]
    So3(#[from] So3Error),
    #[error(transparent)]
    GainNet(#[from] GainNetError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GainNetError {
    #[error("non-finite activation in axis {axis}, layer {layer}")]
    NonFiniteActivation { axis: usize, layer: usize },
    #[error("parameter file: {0}")]
    Format(String),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("recording {id} has {len} samples, fewer than the segment length {segment_length}")]
    RecordingTooShort {
        id: String,
        len: usize,
        segment_length: usize,
    },
    #[error("non-finite loss on segment {segment}")]
    NonFiniteLoss { segment: usize },
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("no training data")]
    EmptyData,
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error(transparent)]
    GainNet(#[from] GainNetError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{0}")]
    Alignment(String),
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    NonFinite(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    GainNet(#[from] GainNetError),
}

impl BenchError {
    /// True for failures caused by the input data rather than the numerics.
    pub fn is_validation(&self) -> bool {
        match self {
            BenchError::Parse { .. }
            | BenchError::Alignment(_)
            | BenchError::Invalid(_)
            | BenchError::Io { .. }
            | BenchError::GainNet(GainNetError::Format(_) | GainNetError::Io { .. }) => true,
            BenchError::Filter(e) | BenchError::Train(TrainError::Filter(e)) => is_timing(e),
            BenchError::Train(e) => matches!(
                e,
                TrainError::RecordingTooShort { .. }
                    | TrainError::InvalidConfig(_)
                    | TrainError::EmptyData
                    | TrainError::Io { .. }
                    | TrainError::GainNet(GainNetError::Format(_) | GainNetError::Io { .. })
            ),
            _ => false,
        }
    }
}

/// Bad timestamps are a property of the data, not of the numerics.
fn is_timing(e: &FilterError) -> bool {
    matches!(e, FilterError::NonMonotonicTime { .. } | FilterError::DtTooLarge { .. })
}
