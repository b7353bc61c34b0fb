use thiserror::Error;

/// Errors raised by the engine library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A parameter or input value is outside its admissible domain.
    #[error("invalid value for `{field}`: {value} ({reason})")]
    Domain {
        field: &'static str,
        value: f64,
        reason: &'static str,
    },

    /// The stochastic integrator produced a non-finite state.
    #[error("integration failed at step {step} (t = {time}): non-finite state")]
    Integration { step: u64, time: f64 },

    /// A quadrature failed its convergence check.
    #[error("quadrature with {nodes} nodes not converged (error estimate {estimate:e})")]
    Quadrature { nodes: usize, estimate: f64 },

    /// A statistics request that the supplied records cannot satisfy.
    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_positive(field: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain {
            field,
            value,
            reason: "must be strictly positive and finite",
        })
    }
}

pub(crate) fn ensure_non_negative(field: &'static str, value: f64) -> Result<()> {
    if value >= 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain {
            field,
            value,
            reason: "must be non-negative and finite",
        })
    }
}
