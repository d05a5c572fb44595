use thiserror::Error;

/// Errors raised by assembly, stepping, diagnostics and I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("weights diverge, requires ps < N (got p*s = {0})")]
    ExponentViolation(f64),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("kernel weight function: {0}")]
    Kappa(String),

    #[error("source: {0}")]
    Source(String),

    #[error("poincare ratio undefined for the zero field")]
    ZeroField,

    #[error("newton did not converge after {iters} iterations (gradient sup-norm {grad_norm:e})")]
    NoConvergence {
        iters: usize,
        grad_norm: f64,
        last_iterate: Vec<f64>,
    },

    #[error("step {step}: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("ladder level {level}: {source}")]
    Level {
        level: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("config line {line}, key `{key}`: {msg}")]
    Config {
        key: String,
        line: usize,
        msg: String,
    },

    #[error("csv {path} row {row}: {msg}")]
    Csv { path: String, row: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
