use std::path::PathBuf;

use serde_json::json;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {}", .0.join("; "))]
    Config(Vec<String>),
    #[error("{0}")]
    Usage(String),
    #[error("stage input missing: {what} at {}", path.display())]
    MissingInput { what: String, path: PathBuf },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] mbg_core::error::Error),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Usage(_) => "usage",
            CliError::MissingInput { .. } => "missing_input",
            CliError::Io { .. } => "io",
            CliError::Core(_) => "core",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Usage(_) => 2,
            _ => 1,
        }
    }

    /// Single-line JSON record written to stderr on failure.
    pub fn error_line(&self, stage: &str) -> String {
        let mut v = json!({
            "status": "error",
            "stage": stage,
            "kind": self.kind(),
            "message": self.to_string(),
        });
        match self {
            CliError::Config(problems) => v["violations"] = json!(problems),
            CliError::MissingInput { path, .. } => v["path"] = json!(path),
            _ => {}
        }
        v.to_string()
    }
}

pub type CliResult<T> = Result<T, CliError>;
