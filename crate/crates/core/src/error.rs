use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("overflow in linear-space evaluation at u = {u}: use the log-space form")]
    Overflow { u: f64 },

    #[error("{what} failed to converge after {iterations} iterations")]
    Convergence { what: &'static str, iterations: usize },

    #[error("non-finite value at node {index} ({value})")]
    NonFinite { index: usize, value: f64 },

    #[error("step size underflow: {0}")]
    StepUnderflow(String),

    #[error("global existence suspected: {0}")]
    GlobalExistence(String),

    #[error("config error at `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("missing artifacts: {}", .0.join(", "))]
    MissingArtifacts(Vec<String>),

    #[error("refusing to overwrite {0} (pass --force)")]
    WouldOverwrite(PathBuf),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    /// Process exit code for the CLI: 2 for usage/config problems, 3 for
    /// numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. }
            | Error::MissingArtifacts(_)
            | Error::WouldOverwrite(_)
            | Error::Io { .. }
            | Error::Json { .. } => 2,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
