use thiserror::Error;

/// Errors raised by the simulation library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("quadrature did not converge: estimate {estimate_re:e}{estimate_im:+e}i, error bound {error_bound:e} after {subdivisions} subdivisions")]
    Quadrature {
        estimate_re: f64,
        estimate_im: f64,
        error_bound: f64,
        subdivisions: usize,
    },

    #[error("kernel evaluation failed at R = {radius} um: {source}")]
    KernelSample {
        radius: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("configuration mismatch: {0}")]
    Mismatch(String),

    #[error("field diverged at z = {z} um (max |U| = {max_amplitude:e})")]
    Divergence { z: f64, max_amplitude: f64 },

    #[error("fidelity undefined for a field with zero power")]
    ZeroPower,

    #[error("optimizer: {0}")]
    Optimizer(String),

    #[error("config: {0}")]
    Config(String),

    #[error("malformed snapshot: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field,
            reason: reason.into(),
        }
    }
}
