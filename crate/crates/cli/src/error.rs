use std::path::PathBuf;

use serde_json::{json, Value};

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_PARSE: i32 = 3;
pub const EXIT_VALIDATION: i32 = 4;
pub const EXIT_SOLVER: i32 = 5;
pub const EXIT_ANALYSIS: i32 = 6;
pub const EXIT_IO: i32 = 7;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Input {
        path: PathBuf,
        source: rydberg_core::Error,
    },

    #[error(transparent)]
    Core(#[from] rydberg_core::Error),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    pub fn input(path: impl Into<PathBuf>, source: rydberg_core::Error) -> Self {
        CliError::Input { path: path.into(), source }
    }

    pub fn validation(msg: impl Into<String>) -> Self {
        CliError::Core(rydberg_core::Error::Validation(msg.into()))
    }

    fn core(&self) -> Option<&rydberg_core::Error> {
        match self {
            CliError::Core(e) | CliError::Input { source: e, .. } => Some(e),
            _ => None,
        }
    }

    pub fn kind(&self) -> &'static str {
        use rydberg_core::Error as E;
        match self {
            CliError::Usage(_) => "usage",
            CliError::Io { .. } => "io",
            _ => match self.core().expect("core variant") {
                E::Parse { .. } => "parse",
                E::Validation(_) => "validation",
                E::DegenerateNullSpace { .. } | E::Solver(_) | E::StepFailure { .. } => "solver",
                E::Analysis(_) => "analysis",
                E::Io(_) => "io",
            },
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind() {
            "usage" => EXIT_USAGE,
            "parse" => EXIT_PARSE,
            "validation" => EXIT_VALIDATION,
            "solver" => EXIT_SOLVER,
            "analysis" => EXIT_ANALYSIS,
            _ => EXIT_IO,
        }
    }

    /// One-line JSON diagnostic for stderr.
    pub fn diagnostic(&self) -> Value {
        let mut d = json!({
            "error": self.kind(),
            "exit_code": self.exit_code(),
            "message": self.to_string(),
        });
        if let CliError::Io { path, .. } | CliError::Input { path, .. } = self {
            d["path"] = json!(path.display().to_string());
        }
        if let Some(rydberg_core::Error::Parse { line, field, .. }) = self.core() {
            d["line"] = json!(line);
            d["field"] = json!(field);
        }
        d
    }
}

pub type CliResult<T> = Result<T, CliError>;
