use thiserror::Error;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("line {line}: channel count mismatch (expected {expected}, found {found})")]
    ChannelCountMismatch { line: u64, expected: usize, found: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("numerical blow-up at t = {time_s} s")]
    NonFinite { time_s: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("{path}: {source}")]
    File {
        path: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Stable machine-readable tag, used by the CLI's error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::Parse { .. } => "parse",
            Error::ChannelCountMismatch { .. } => "channel_count_mismatch",
            Error::Degenerate(_) => "degenerate",
            Error::NonFinite { .. } => "non_finite",
            Error::InsufficientData(_) => "insufficient_data",
            Error::File { source, .. } => source.kind(),
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }

    pub(crate) fn in_file(self, path: &std::path::Path) -> Error {
        Error::File {
            path: path.display().to_string(),
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
