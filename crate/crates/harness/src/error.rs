use std::io;
use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),
    /// Malformed file contents (bad magic, truncated, wrong record size).
    #[error("format error: {0}")]
    Format(String),
    /// Well-formed file with invalid values, e.g. a label outside [0, 10).
    #[error("data error: {0}")]
    Data(String),
    #[error("dataset file {} not found: {hint}", path.display())]
    MissingData { path: PathBuf, hint: String },
    #[error("training diverged: non-finite loss in epoch {epoch}")]
    Divergence { epoch: usize },
    #[error("gradient check failed: {0}")]
    GradCheck(String),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Core(#[from] nirmal_core::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(context: impl Into<String>, source: io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    /// Process exit status for this error: 2 config, 3 data, 4 divergence,
    /// 5 gradient check, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Format(_) | Error::Data(_) | Error::MissingData { .. } => 3,
            Error::Core(nirmal_core::Error::Data(_)) => 3,
            Error::Divergence { .. } => 4,
            Error::GradCheck(_) => 5,
            _ => 1,
        }
    }
}
