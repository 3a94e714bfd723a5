//! Crate-wide error type.

use std::path::PathBuf;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("pixel at ({row}, {col}, channel {channel}) is {value}, outside [0, 1] or non-finite")]
    InvalidPixel {
        value: f32,
        row: usize,
        col: usize,
        channel: usize,
    },

    #[error("invalid image dimensions {height}x{width}x{channels}: {reason}")]
    InvalidDims {
        height: usize,
        width: usize,
        channels: usize,
        reason: String,
    },

    #[error("invalid transform spec: {0}")]
    InvalidTransform(String),

    #[error("invalid transform set `{name}`: {reason}")]
    InvalidTransformSet { name: String, reason: String },

    #[error("unknown preset `{name}`; valid presets: {valid}")]
    UnknownPreset { name: String, valid: String },

    #[error("transform {index} of set `{set}` failed: {source}")]
    TransformFailed {
        set: String,
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: String, actual: String },

    #[error("manifest {path}: line {line}: {reason}")]
    ManifestParse {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("manifest {path}: {reason}")]
    ManifestInvalid { path: PathBuf, reason: String },

    #[error("missing file {path}")]
    MissingFile { path: PathBuf },

    #[error("cannot decode image {path}: {source}")]
    ImageDecode {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("requested train size {requested} exceeds pool of {available} majority samples")]
    TrainSizeExceedsPool { requested: usize, available: usize },

    #[error("invalid synthetic config: {0}")]
    InvalidSyntheticConfig(String),

    #[error("invalid classifier config: {0}")]
    InvalidClassifierConfig(String),

    #[error("invalid train config: {0}")]
    InvalidTrainConfig(String),

    #[error("empty training set")]
    EmptyTrainingSet,

    #[error("mixed-class training batch: training expects majority samples only")]
    MixedTrainingBatch,

    #[error("training diverged: non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },

    #[error("model file {path}: {reason}")]
    ModelFile { path: PathBuf, reason: String },

    #[error("corrupt model data: {0}")]
    CorruptModel(String),

    #[error("unsupported model format version {found} (this build reads version {expected})")]
    ModelVersion { found: u32, expected: u32 },

    #[error("invalid probability matrix: {0}")]
    InvalidProbabilityMatrix(String),

    #[error("scores cover a single class; metrics need both majority and minority samples")]
    SingleClassScores,

    #[error("invalid labeled scores: {0}")]
    InvalidLabeledScores(String),

    #[error("invalid experiment config: {0}")]
    InvalidConfig(String),

    #[error("config file {path}: {reason}")]
    ConfigParse { path: PathBuf, reason: String },

    #[error("io error on {path}: {source}")]
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
}
