use std::path::PathBuf;

use crate::network::NodeId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("network needs at least an input and an output layer, got {0} layer(s)")]
    TooFewLayers(usize),
    #[error("layer {layer} has zero nodes")]
    ZeroSizeLayer { layer: usize },
    #[error("sign pattern for layer {layer} has {actual} entries, expected {expected}")]
    SignPattern {
        layer: usize,
        expected: usize,
        actual: usize,
    },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },
    #[error("trace does not belong to this network")]
    TraceShape,
    #[error("not a standard regression network: output layer must be one positive and one negative node")]
    OutputLayer,
    #[error("layer {0} is not a hidden layer")]
    NotHidden(usize),
    #[error("non-finite {0}")]
    NonFinite(&'static str),
    #[error("expected one rescale factor per hidden layer ({expected}), got {actual}")]
    RescaleLength { expected: usize, actual: usize },
    #[error("rescale factor for hidden layer {layer} must be positive, got {value}")]
    Rescale { layer: usize, value: f64 },
    #[error("non-finite gradient at {0}")]
    NonFiniteGradient(NodeId),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{0} is empty")]
    Empty(&'static str),
    #[error("target variance is zero")]
    ZeroVariance,
    #[error("firing set is empty")]
    EmptyFiringSet,
    #[error("grid search comparator supports at most {max} dimensions, got {actual}")]
    GridDimension { max: usize, actual: usize },
    #[error("{path}: line {line}: {message}")]
    Csv {
        path: PathBuf,
        line: u64,
        message: String,
    },
    #[error("malformed network file: line {line}: {message}")]
    NetworkFormat { line: usize, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True when the failure comes from the filesystem rather than from the data.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }

    /// True for failures caused by non-finite numbers during a computation.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::NonFinite(_) | Error::NonFiniteGradient(_))
    }
}
