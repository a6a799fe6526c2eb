use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error("invalid mark space: {0}")]
    InvalidMarks(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite input {name} = {value}")]
    NonFinite { name: &'static str, value: f64 },

    #[error("generator references {what} but only {available} available")]
    Arity { what: String, available: usize },

    #[error("coefficient check failed: {0}")]
    Coefficient(String),

    #[error("(A4) integrability violated: integral of gamma + rho^2 + sigma^2 over {range} is {value}")]
    Integrability { range: String, value: f64 },

    #[error("jump kernel bound violated: {0}")]
    Kernel(String),

    #[error("measure change invalid: {0}")]
    MeasureChange(String),

    #[error("singular regression at step {step}: {reason}")]
    SingularRegression { step: usize, reason: String },

    #[error("non-finite value in Y at step {step}")]
    Divergence { step: usize },

    #[error("solutions are not defined on the same ensemble: {0}")]
    EnsembleMismatch(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn ensure_finite(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite { name, value })
    }
}
