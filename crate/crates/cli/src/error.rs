use std::path::PathBuf;

use serde_json::json;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{message}")]
    Usage { message: String },
    #[error("{}", config_context(.line, .key, .message))]
    ConfigParse {
        line: Option<usize>,
        key: Option<String>,
        message: String,
    },
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
    #[error("validation suite failed: {0}")]
    ValidationFailed(String),
    #[error(transparent)]
    Compute(#[from] ruinlab::Error),
}

fn config_context(line: &Option<usize>, key: &Option<String>, message: &str) -> String {
    match (line, key) {
        (Some(l), Some(k)) => format!("line {l}, key {k}: {message}"),
        (Some(l), None) => format!("line {l}: {message}"),
        (None, Some(k)) => format!("key {k}: {message}"),
        (None, None) => message.to_string(),
    }
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError::Usage { message: message.into() }
    }

    pub fn config(line: Option<usize>, key: Option<&str>, message: impl Into<String>) -> Self {
        CliError::ConfigParse {
            line,
            key: key.map(str::to_string),
            message: message.into(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            CliError::Usage { .. } => "UsageError",
            CliError::ConfigParse { .. } => "ConfigParseError",
            CliError::Read { .. } => "ReadError",
            CliError::Write { .. } => "WriteError",
            CliError::ValidationFailed(_) => "ValidationFailed",
            CliError::Compute(e) => e.name(),
        }
    }

    /// 2 for problems with the request itself, 1 for everything that went
    /// wrong while carrying it out.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage { .. } | CliError::ConfigParse { .. } | CliError::Read { .. } => 2,
            _ => 1,
        }
    }

    /// Single-line JSON record for the diagnostic stream.
    pub fn record(&self) -> String {
        let mut v = json!({
            "error": self.name(),
            "message": self.to_string(),
            "exit_code": self.exit_code(),
        });
        if let CliError::ConfigParse { line, key, .. } = self {
            if let Some(l) = line {
                v["line"] = json!(l);
            }
            if let Some(k) = key {
                v["key"] = json!(k);
            }
        }
        v.to_string()
    }
}
