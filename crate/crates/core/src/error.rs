use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Argument outside the domain of a function (e.g. `t >= T`).
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// `(log sigma)'` is unbounded at the requested time.
    #[error("unbounded derivative: {0}")]
    UnboundedDerivative(String),

    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("non-finite state at step {step}")]
    NonFinite { step: usize },

    /// Every Monte-Carlo proposal landed where the density vanishes.
    #[error("proposal resampling exhausted after {attempts} attempts: {detail}")]
    ResamplingExhausted { attempts: usize, detail: String },

    #[error("rejection sampling acceptance rate {rate:.3e} below 1e-4")]
    LowAcceptance { rate: f64 },

    #[error("invalid objective value {value} at {point:?}")]
    InvalidObjective { value: f64, point: Vec<f64> },

    #[error("{failed} of {total} trajectories failed (limit 1%)")]
    TooManyFailures { failed: usize, total: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
