use thiserror::Error;

/// Errors surfaced by every module of the toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("range error: {what} is not representable at nu={nu}, x={x}")]
    Range { what: &'static str, nu: f64, x: f64 },

    #[error("capability error: {0}")]
    Capability(String),

    #[error("root finder failed for nu={nu}, k={k}: {reason}")]
    RootFinder { nu: f64, k: usize, reason: String },

    #[error("quadrature did not converge for nu={nu}, z={z}")]
    Quadrature { nu: f64, z: f64 },

    #[error("trace-class violation: 2m = {two_m} does not exceed dim = {dim}")]
    TraceClass { two_m: u32, dim: u32 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("ill-conditioned fit: condition estimate {cond:.3e} exceeds {limit:.3e}")]
    IllConditioned { cond: f64, limit: f64 },

    #[error("hypothesis rejected ({assumption}): {detail}")]
    Hypothesis { assumption: &'static str, detail: String },

    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("io error: {0}")]
    Io(String),

    #[error("format error: {0}")]
    Format(String),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
