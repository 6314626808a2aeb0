//! Simulation of continuous-variable polarization squeezing.
//!
//! A bright coherent beam in one linear polarization is combined with a
//! quadrature-squeezed beam from a degenerate optical parametric amplifier
//! (OPA) in the orthogonal polarization. The library models every stage of
//! that experiment in the linearized Gaussian picture:
//!
//! - [`gaussian`]: single-mode Gaussian states (mean + 2x2 quadrature
//!   covariance) and the loss, phase and beam-splitter maps acting on them.
//! - [`opa`]: classical parametric gain, below-threshold squeezing spectra
//!   and the detection efficiency budget.
//! - [`stokes`]: the two-mode polarization state and the means and variances
//!   of the four Stokes operators.
//! - [`detection`]: measurement stations, spectrum-analyzer statistics,
//!   synthetic noise traces and the Monte Carlo sampling oracle.
//! - [`cli`]: configuration file format, command dispatch and CSV/JSON output
//!   for the `polsqueeze` binary.
//!
//! All noise levels are in shot-noise units: the vacuum quadrature variance
//! is 1, so the quantum noise limit (QNL) reads 0 dB.

pub mod cli;
pub mod detection;
pub mod error;
pub mod gaussian;
pub mod opa;
pub mod stokes;

pub use error::{Error, Result};
pub use gaussian::{db_from_variance, variance_from_db, GaussianMode, QuadratureVariancePair};
pub use opa::{EfficiencyBudget, GainPair, OpaConfig};
pub use stokes::{PolarizationState, StokesMoments};
