//! Config-driven front end: one TOML file in, one JSON (or ROC CSV) report out.
//!
//! Exit codes: 0 success, 1 numeric or I/O failure, 2 configuration error
//! (no output written), 3 convergence failure (partial report written).

pub mod config;
pub mod report;
pub mod run;

pub use config::{Command, Format, RunConfig};
pub use report::{RunReport, Section};
pub use run::{run, run_with_threads, Outcome};

use crate::error::FomError;
use report::ErrorObject;
use serde::Serialize;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_CONVERGENCE: i32 = 3;

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "FOMLAB_THREADS";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{kind} error{}: {message}", key.as_ref().map(|k| format!(" at '{k}'")).unwrap_or_default())]
pub struct CliError {
    pub exit_code: i32,
    pub kind: String,
    pub key: Option<String>,
    pub message: String,
}

impl CliError {
    pub fn schema(key: &str, message: impl Into<String>) -> Self {
        CliError {
            exit_code: EXIT_CONFIG,
            kind: "config".into(),
            key: (!key.is_empty()).then(|| key.to_string()),
            message: message.into(),
        }
    }

    pub fn io(message: impl Into<String>) -> Self {
        CliError {
            exit_code: EXIT_FAILURE,
            kind: "io".into(),
            key: None,
            message: message.into(),
        }
    }

    pub fn object(&self) -> ErrorObject {
        ErrorObject {
            kind: self.kind.clone(),
            key: self.key.clone(),
            message: self.message.clone(),
            exit_code: self.exit_code,
        }
    }

    /// `{"error": {...}}` on one line.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Wrapper {
            error: ErrorObject,
        }
        serde_json::to_string(&Wrapper { error: self.object() }).unwrap_or_else(|_| self.to_string())
    }
}

impl From<FomError> for CliError {
    fn from(e: FomError) -> Self {
        let (exit_code, kind, key) = match &e {
            FomError::Config { key, .. } => (EXIT_CONFIG, "config", Some(key.clone())),
            FomError::Convergence { .. } => (EXIT_CONVERGENCE, "convergence", None),
            FomError::Domain(_) => (EXIT_FAILURE, "domain", None),
            FomError::Data(_) => (EXIT_FAILURE, "data", None),
            FomError::Precondition(_) => (EXIT_FAILURE, "precondition", None),
        };
        let message = match &e {
            FomError::Config { message, .. } => message.clone(),
            other => other.to_string(),
        };
        CliError {
            exit_code,
            kind: kind.into(),
            key,
            message,
        }
    }
}

/// Worker count from `FOMLAB_THREADS`, if set.
pub fn threads_from_env() -> Result<Option<usize>, CliError> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(CliError::schema(THREADS_ENV, format!("expected a positive integer, got '{v}'"))),
        },
    }
}
