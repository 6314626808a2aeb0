//! Single-mode Gaussian states in shot-noise units.
//!
//! A mode is a coherent amplitude `(mean_x, mean_p)` plus the 2x2 covariance
//! of its quadrature fluctuations `(dX+, dX-)`. The vacuum covariance is the
//! identity. `dX+` is the amplitude quadrature, taken along the `mean_x` axis,
//! and `dX-` the phase quadrature.
//!
//! Distinct modes are treated as uncorrelated, so no cross-mode covariance
//! is stored anywhere in this crate.

use nalgebra::{Matrix2, Vector2};

use crate::error::{check_closed, check_finite, Error, Result};

/// Slack allowed on `det(cov) >= 1` and on symmetry/positivity checks.
pub const PHYSICALITY_TOL: f64 = 1e-9;

/// Variances of the amplitude (`v_plus`) and phase (`v_minus`) quadratures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureVariancePair {
    pub v_plus: f64,
    pub v_minus: f64,
}

impl QuadratureVariancePair {
    pub fn new(v_plus: f64, v_minus: f64) -> Result<Self> {
        for (name, v) in [("v_plus", v_plus), ("v_minus", v_minus)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Domain {
                    name,
                    value: v,
                    domain: "(0, inf)",
                });
            }
        }
        Ok(Self { v_plus, v_minus })
    }

    /// Product of the two variances; at least 1 for any physical state.
    pub fn product(&self) -> f64 {
        self.v_plus * self.v_minus
    }

    pub fn plus_db(&self) -> f64 {
        10.0 * self.v_plus.log10()
    }

    pub fn minus_db(&self) -> f64 {
        10.0 * self.v_minus.log10()
    }
}

/// One optical mode: coherent amplitude and quadrature covariance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianMode {
    mean: Vector2<f64>,
    cov: Matrix2<f64>,
}

impl GaussianMode {
    /// Builds a mode from an explicit mean and covariance, rejecting
    /// asymmetric, non-positive or sub-Heisenberg covariances.
    pub fn new(mean: Vector2<f64>, cov: Matrix2<f64>) -> Result<Self> {
        if !mean.iter().chain(cov.iter()).all(|v| v.is_finite()) {
            return Err(Error::Unphysical("non-finite mean or covariance".into()));
        }
        if (cov[(0, 1)] - cov[(1, 0)]).abs() > PHYSICALITY_TOL {
            return Err(Error::Unphysical(format!(
                "covariance is not symmetric ({} vs {})",
                cov[(0, 1)],
                cov[(1, 0)]
            )));
        }
        let mode = Self {
            mean,
            cov: symmetrize(cov),
        };
        let [lo, _] = mode.cov_eigenvalues();
        if lo <= 0.0 {
            return Err(Error::Unphysical(format!(
                "covariance is not positive definite (smallest eigenvalue {lo})"
            )));
        }
        if mode.det() < 1.0 - PHYSICALITY_TOL {
            return Err(Error::Unphysical(format!(
                "det(cov) = {} violates the uncertainty bound",
                mode.det()
            )));
        }
        Ok(mode)
    }

    pub fn vacuum() -> Self {
        Self::coherent(0.0, 0.0)
    }

    /// Coherent state: displaced vacuum, noise at the QNL in every quadrature.
    pub fn coherent(alpha_x: f64, alpha_p: f64) -> Self {
        Self {
            mean: Vector2::new(alpha_x, alpha_p),
            cov: Matrix2::identity(),
        }
    }

    /// Pure squeezed state with squeezing parameter `r`.
    ///
    /// The covariance eigenvalues are `exp(-2r)` and `exp(2r)`, with the
    /// squeezed (minor) axis at `squeeze_angle` from the amplitude quadrature.
    pub fn squeezed(r: f64, squeeze_angle: f64, alpha_x: f64, alpha_p: f64) -> Result<Self> {
        check_finite("r", r)?;
        check_finite("squeeze_angle", squeeze_angle)?;
        let diag = Matrix2::new((-2.0 * r).exp(), 0.0, 0.0, (2.0 * r).exp());
        let rot = rotation(squeeze_angle);
        Ok(Self {
            mean: Vector2::new(alpha_x, alpha_p),
            cov: symmetrize(rot * diag * rot.transpose()),
        })
    }

    /// Mode with a diagonal covariance given directly as quadrature variances.
    ///
    /// Mixed states are allowed; the product must still satisfy the
    /// uncertainty bound.
    pub fn from_variances(pair: QuadratureVariancePair, alpha_x: f64, alpha_p: f64) -> Result<Self> {
        let pair = QuadratureVariancePair::new(pair.v_plus, pair.v_minus)?;
        Self::new(
            Vector2::new(alpha_x, alpha_p),
            Matrix2::new(pair.v_plus, 0.0, 0.0, pair.v_minus),
        )
    }

    /// Adds classical noise (in QNL units) to the amplitude quadrature.
    pub fn with_excess_noise(mut self, excess: f64) -> Result<Self> {
        if !(excess.is_finite() && excess >= 0.0) {
            return Err(Error::Domain {
                name: "excess_noise",
                value: excess,
                domain: "[0, inf)",
            });
        }
        self.cov[(0, 0)] += excess;
        Ok(self)
    }

    pub fn mean_x(&self) -> f64 {
        self.mean.x
    }

    pub fn mean_p(&self) -> f64 {
        self.mean.y
    }

    pub fn mean(&self) -> Vector2<f64> {
        self.mean
    }

    pub fn cov(&self) -> Matrix2<f64> {
        self.cov
    }

    /// `mean_x^2 + mean_p^2`, the mean photon flux in the bright-field limit.
    pub fn intensity(&self) -> f64 {
        self.mean.norm_squared()
    }

    /// Coherent amplitude `|alpha|`.
    pub fn amplitude(&self) -> f64 {
        self.mean.norm()
    }

    pub fn variances(&self) -> QuadratureVariancePair {
        QuadratureVariancePair {
            v_plus: self.cov[(0, 0)],
            v_minus: self.cov[(1, 1)],
        }
    }

    pub fn det(&self) -> f64 {
        self.cov[(0, 0)] * self.cov[(1, 1)] - self.cov[(0, 1)] * self.cov[(1, 0)]
    }

    /// Covariance eigenvalues, ascending.
    pub fn cov_eigenvalues(&self) -> [f64; 2] {
        let (a, b, d) = (self.cov[(0, 0)], self.cov[(0, 1)], self.cov[(1, 1)]);
        let centre = 0.5 * (a + d);
        let radius = (0.25 * (a - d) * (a - d) + b * b).sqrt();
        [centre - radius, centre + radius]
    }

    pub fn is_physical(&self) -> bool {
        self.cov_eigenvalues()[0] > 0.0 && self.det() >= 1.0 - PHYSICALITY_TOL
    }

    pub(crate) fn check_physical(&self) -> Result<()> {
        if self.is_physical() {
            Ok(())
        } else {
            Err(Error::Unphysical(format!("det(cov) = {}", self.det())))
        }
    }
}

fn rotation(phi: f64) -> Matrix2<f64> {
    let (s, c) = phi.sin_cos();
    Matrix2::new(c, -s, s, c)
}

fn symmetrize(m: Matrix2<f64>) -> Matrix2<f64> {
    let off = 0.5 * (m[(0, 1)] + m[(1, 0)]);
    Matrix2::new(m[(0, 0)], off, off, m[(1, 1)])
}

/// Pure-loss channel of transmission `eta`: a beam splitter whose idle port
/// carries vacuum.
///
/// `mean -> sqrt(eta) mean`, `cov -> I + eta (cov - I)`. Written around the
/// identity so vacuum noise stays exactly at the QNL for every `eta`.
pub fn apply_loss(mode: &GaussianMode, eta: f64) -> Result<GaussianMode> {
    check_closed("eta", eta, 0.0, 1.0, "[0, 1]")?;
    if eta == 1.0 {
        return Ok(*mode);
    }
    let identity = Matrix2::identity();
    Ok(GaussianMode {
        mean: mode.mean * eta.sqrt(),
        cov: identity + (mode.cov - identity) * eta,
    })
}

/// Rotates the mode in phase space by `phi` (the field picks up `exp(i phi)`).
pub fn phase_shift(mode: &GaussianMode, phi: f64) -> GaussianMode {
    // R cov R^T as a correction to each entry, so that phi = 0 and
    // isotropic covariances (vacuum, thermal) come out exact
    let c = mode.cov;
    let diff = 0.5 * (c[(0, 0)] - c[(1, 1)]);
    let off = c[(0, 1)];
    let (s1, c1) = phi.sin_cos();
    let (s2, c2) = (2.0 * s1 * c1, c1 * c1 - s1 * s1);
    let dxx = -2.0 * s1 * s1 * diff - off * s2;
    let xp = diff * s2 + off * c2;
    GaussianMode {
        mean: rotation(phi) * mode.mean,
        cov: Matrix2::new(c[(0, 0)] + dxx, xp, xp, c[(1, 1)] - dxx),
    }
}

/// Mixes two independent modes on a beam splitter of power transmissivity `t`.
///
/// Outputs are `c = sqrt(t) a - sqrt(1-t) b` and `d = sqrt(1-t) a + sqrt(t) b`.
/// The correlation between `c` and `d` is discarded.
pub fn beamsplit(a: &GaussianMode, b: &GaussianMode, t: f64) -> Result<(GaussianMode, GaussianMode)> {
    check_closed("t", t, 0.0, 1.0, "[0, 1]")?;
    let r = 1.0 - t;
    let (st, sr) = (t.sqrt(), r.sqrt());
    let c = GaussianMode {
        mean: a.mean * st - b.mean * sr,
        cov: a.cov * t + b.cov * r,
    };
    let d = GaussianMode {
        mean: a.mean * sr + b.mean * st,
        cov: a.cov * r + b.cov * t,
    };
    Ok((c, d))
}

/// `10 log10(v)` with the QNL (v = 1) at 0 dB.
pub fn db_from_variance(v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(10.0 * v.log10())
    } else {
        Err(Error::Domain {
            name: "variance",
            value: v,
            domain: "(0, inf)",
        })
    }
}

pub fn variance_from_db(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}
