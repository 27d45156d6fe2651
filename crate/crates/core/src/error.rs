use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("graph generation failed: no connected G(n={n}, p={edge_prob}) sample after {attempts} attempts")]
    Disconnected {
        n: usize,
        edge_prob: f64,
        attempts: u32,
    },

    #[error("run failed for combo {combo}, repeat {repeat}: {source}")]
    Run {
        combo: usize,
        repeat: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("input schema error: {0}")]
    Schema(String),

    #[error("analysis error: {0}")]
    Analysis(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error on {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short category name used for process exit codes and CLI diagnostics.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Config { .. } => "config",
            Error::Disconnected { .. } => "graph",
            Error::Run { .. } => "run",
            Error::Schema(_) => "schema",
            Error::Analysis(_) => "analysis",
            Error::Io { .. } | Error::Csv { .. } => "io",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } => 2,
            Error::Disconnected { .. } | Error::Run { .. } => 3,
            Error::Schema(_) | Error::Analysis(_) => 4,
            Error::Io { .. } | Error::Csv { .. } => 5,
        }
    }
}
