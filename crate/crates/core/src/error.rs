use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by the physics and measurement modules.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A parameter is outside the range where the model is defined.
    #[error("{name} = {value} is outside its domain {domain}")]
    Domain {
        name: &'static str,
        value: f64,
        domain: &'static str,
    },
    /// The OPA pump power reached or exceeded threshold.
    #[error("pump power {pump_power} mW is at or above threshold {threshold_power} mW")]
    AboveThreshold { pump_power: f64, threshold_power: f64 },
    /// A covariance matrix violates positivity or the uncertainty bound.
    #[error("unphysical Gaussian state: {0}")]
    Unphysical(String),
    /// QNL normalization requested for a state carrying no photon flux.
    #[error("dark state: shot-noise reference is zero, normalized variances are undefined")]
    DarkState,
    /// Relative phase outside {0, pi/2} without opting into the linearized path.
    #[error("relative phase {0} rad is not a lock point (0 or pi/2); enable the general-phase path to use it")]
    UnsupportedPhase(f64),
    #[error("Monte Carlo needs at least {min} samples, got {got}")]
    TooFewSamples { min: usize, got: usize },
}

pub(crate) fn check_finite(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Domain {
            name,
            value,
            domain: "finite reals",
        })
    }
}

/// Checks `lo <= value <= hi`.
pub(crate) fn check_closed(name: &'static str, value: f64, lo: f64, hi: f64, domain: &'static str) -> Result<f64> {
    if value.is_finite() && value >= lo && value <= hi {
        Ok(value)
    } else {
        Err(Error::Domain { name, value, domain })
    }
}

/// Checks `0 < value <= 1`.
pub(crate) fn check_unit_fraction(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() && value > 0.0 && value <= 1.0 {
        Ok(value)
    } else {
        Err(Error::Domain {
            name,
            value,
            domain: "(0, 1]",
        })
    }
}
