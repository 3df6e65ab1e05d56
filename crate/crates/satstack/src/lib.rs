//! File formats and subcommands of the `satstack` tool.

use std::path::Path;

pub mod commands;
pub mod io;
pub mod manifest;
pub mod schema;

/// What a completed command found.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    BudgetViolation,
}

impl Outcome {
    pub fn exit_code(self) -> u8 {
        match self {
            Self::Pass => 0,
            Self::BudgetViolation => 2,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("validation error: {0}")]
    Validation(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Validation(_) => 3,
            Self::Io { .. } => 4,
        }
    }
}

impl From<satstack_core::Error> for CliError {
    fn from(e: satstack_core::Error) -> Self {
        Self::Validation(e.to_string())
    }
}

impl From<schema::SchemaError> for CliError {
    fn from(e: schema::SchemaError) -> Self {
        Self::Validation(e.to_string())
    }
}

/// Parses `"v1,v2,…"`.
pub fn parse_list(s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| CliError::Validation(format!("not a finite number: {t:?}")))
        })
        .collect()
}
