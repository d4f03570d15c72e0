use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Failures while reading a persisted model container.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FormatError {
    #[error("not a model file (bad magic bytes)")]
    BadMagic,
    #[error("unsupported model format version {found} (this build reads version {supported})")]
    UnsupportedVersion { found: u16, supported: u16 },
    #[error("model file truncated: expected {expected} bytes, found {actual}")]
    Truncated { expected: u64, actual: u64 },
    #[error("model file checksum mismatch; the file is corrupt")]
    ChecksumMismatch,
    #[error("malformed model file: {0}")]
    Malformed(String),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid category path {raw:?}: {reason}")]
    InvalidPath { raw: String, reason: &'static str },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("empty vocabulary: no term survives the document-frequency thresholds")]
    EmptyVocabulary,

    #[error("embedding not found for key {key:?}")]
    EmbeddingNotFound { key: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("empty training set")]
    EmptyTrainingSet,

    #[error("incremental update touches clustered nodes {nodes:?}; retrain those nodes instead")]
    RequiresRecluster { nodes: Vec<String> },

    #[error("incremental update touches child-sampled nodes {nodes:?} but the model carries no sample store")]
    MissingSampleStore { nodes: Vec<String> },

    #[error("invalid synthetic corpus spec: {0}")]
    InvalidSynthSpec(String),

    #[error("data error: {0}")]
    Data(String),

    #[error(transparent)]
    Format(#[from] FormatError),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("internal invariant violated: {0}")]
    Internal(String),
}

/// Coarse grouping used by front ends to choose exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Validation,
    Data,
    ModelFormat,
    Internal,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidPath { .. }
            | Error::Config(_)
            | Error::InvalidSynthSpec(_)
            | Error::RequiresRecluster { .. }
            | Error::MissingSampleStore { .. } => ErrorClass::Validation,
            Error::EmptyVocabulary
            | Error::EmbeddingNotFound { .. }
            | Error::DimensionMismatch { .. }
            | Error::EmptyTrainingSet
            | Error::Data(_)
            | Error::Csv(_)
            | Error::Json(_)
            | Error::Io(_) => ErrorClass::Data,
            Error::Format(_) => ErrorClass::ModelFormat,
            Error::Internal(_) => ErrorClass::Internal,
        }
    }
}
