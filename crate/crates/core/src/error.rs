use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}, field `{field}`: {message}")]
    Parse {
        line: usize,
        field: String,
        message: String,
    },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("steady state is not unique: singular-value gap {gap:.3e} below {threshold:.1e}")]
    DegenerateNullSpace { gap: f64, threshold: f64 },

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("propagation failed on interval [{start:.6e}, {end:.6e}] s: {reason}")]
    StepFailure { start: f64, end: f64, reason: String },

    #[error("analysis failure: {0}")]
    Analysis(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn analysis(msg: impl Into<String>) -> Self {
        Error::Analysis(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
