use std::path::Path;

use serde_json::json;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("{context}: {message}")]
    Run { context: &'static str, message: String },
}

impl CliError {
    pub fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        CliError::Io { path: path.display().to_string(), message: e.to_string() }
    }

    pub fn run(context: &'static str, e: impl std::fmt::Display) -> Self {
        CliError::Run { context, message: e.to_string() }
    }

    /// Machine-readable record for stderr.
    pub fn record(&self) -> serde_json::Value {
        let (kind, key) = match self {
            CliError::Parse(_) => ("parse", None),
            CliError::Config { key, .. } => ("config", Some(key.as_str())),
            CliError::Io { .. } => ("io", None),
            CliError::Run { .. } => ("run", None),
        };
        json!({ "error": { "kind": kind, "key_path": key, "message": self.to_string() } })
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Parse(_) | CliError::Config { .. } => 2,
            _ => 1,
        }
    }
}
