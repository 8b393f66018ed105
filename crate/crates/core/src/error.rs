use thiserror::Error;

/// Errors raised by maps, charts, Hamiltonians and integrators.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A point lies outside the domain of a map or chart.
    #[error("domain error in `{coordinate}` = {value}: {reason}")]
    Domain {
        coordinate: String,
        value: f64,
        reason: &'static str,
    },

    #[error("non-finite input in `{0}`")]
    NonFinite(String),

    #[error("state has length {got}, expected {expected} for {kind}")]
    Dimension {
        kind: &'static str,
        expected: usize,
        got: usize,
    },

    /// Adaptive step fell below the collapse threshold.
    #[error("step size collapsed to {step:e} at s = {s} (threshold {threshold:e})")]
    StepCollapse { s: f64, step: f64, threshold: f64 },

    #[error("step budget of {0} exhausted")]
    MaxSteps(usize),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn domain(coordinate: impl Into<String>, value: f64, reason: &'static str) -> Self {
        Error::Domain {
            coordinate: coordinate.into(),
            value,
            reason,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_finite(name: &str, values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(name.to_string()))
    }
}
