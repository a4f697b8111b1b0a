use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid config: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    Input(String),

    /// A malformed record in a tabular input file.
    #[error("line {line}, field `{field}`: {message}")]
    Row { line: u64, field: String, message: String },

    #[error("unknown station id {0}")]
    UnknownStation(u32),

    #[error("unknown ad id {0}")]
    UnknownAd(u32),

    #[error("missing {path}: run `{run_first}` first")]
    MissingArtifact { path: PathBuf, run_first: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

impl Error {
    /// Stable short tag used in machine-readable diagnostics.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::Input(_) => "input",
            Error::Row { .. } => "row",
            Error::UnknownStation(_) => "unknown_station",
            Error::UnknownAd(_) => "unknown_ad",
            Error::MissingArtifact { .. } => "missing_artifact",
            Error::Io { .. } => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
            Error::Toml(_) => "toml",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
