//! Two-mode polarization states and Stokes-operator moments.
//!
//! The H mode carries the bright coherent beam and the V mode the squeezed
//! beam. Each mode is described in its own frame (amplitude quadrature along
//! its mean). The relative phase `theta` is applied to the V mode as a whole,
//! so its mean and its noise ellipse rotate together.
//!
//! Stokes operators are fixed:
//!
//! ```text
//! S0 = aH'aH + aV'aV     S1 = aH'aH - aV'aV
//! S2 = aH'aV + aV'aH     S3 = i(aV'aH - aH'aV)
//! ```
//!
//! and their fluctuations are linearized around the coherent amplitudes.
//! At the lock points `theta = 0` and `theta = pi/2` the variances reduce to
//! closed forms in the amplitude/phase variances of the two modes; that is
//! the exact path. Any other phase goes through the full linearized
//! covariance, which has to be enabled per state.

use nalgebra::{Matrix2, Matrix3, Matrix4, SymmetricEigen, Vector2};
use std::f64::consts::FRAC_PI_2;

use crate::error::{check_finite, Error, Result};
use crate::gaussian::{phase_shift, GaussianMode};

/// Distance from 0 or pi/2 within which a phase counts as a lock point.
pub const LOCK_POINT_TOL: f64 = 1e-12;

/// The two relative phases where the closed-form variances apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LockPoint {
    Zero,
    HalfPi,
}

impl LockPoint {
    pub fn classify(theta: f64) -> Option<Self> {
        if theta.abs() <= LOCK_POINT_TOL {
            Some(Self::Zero)
        } else if (theta - FRAC_PI_2).abs() <= LOCK_POINT_TOL {
            Some(Self::HalfPi)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarizationState {
    h_mode: GaussianMode,
    v_mode: GaussianMode,
    theta: f64,
    general_theta: bool,
}

/// Combines a bright H mode and a squeezed V mode on a polarizing beam
/// splitter. The modes are not mixed.
pub fn build_polarization_state(h: GaussianMode, v: GaussianMode, theta: f64) -> Result<PolarizationState> {
    h.check_physical()?;
    v.check_physical()?;
    check_finite("theta", theta)?;
    Ok(PolarizationState {
        h_mode: h,
        v_mode: v,
        theta,
        general_theta: false,
    })
}

impl PolarizationState {
    /// Opts this state into the linearized path for phases other than the
    /// lock points.
    pub fn with_general_theta(mut self, allow: bool) -> Self {
        self.general_theta = allow;
        self
    }

    pub fn h_mode(&self) -> &GaussianMode {
        &self.h_mode
    }

    pub fn v_mode(&self) -> &GaussianMode {
        &self.v_mode
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn allows_general_theta(&self) -> bool {
        self.general_theta
    }

    pub fn with_theta(mut self, theta: f64) -> Result<Self> {
        self.theta = check_finite("theta", theta)?;
        Ok(self)
    }

    /// Shot-noise reference `alpha_H^2 + alpha_V^2`.
    pub fn qnl(&self) -> f64 {
        self.h_mode.intensity() + self.v_mode.intensity()
    }

    /// Applies the same operation to both modes, e.g. detector loss.
    pub fn map_modes<F>(&self, mut f: F) -> Result<Self>
    where
        F: FnMut(&GaussianMode) -> Result<GaussianMode>,
    {
        Ok(Self {
            h_mode: f(&self.h_mode)?,
            v_mode: f(&self.v_mode)?,
            ..*self
        })
    }

    /// V mode expressed in the H mode's frame.
    fn v_lab(&self) -> GaussianMode {
        phase_shift(&self.v_mode, self.theta)
    }
}

/// Means, variances and QNL-normalized variances of `S0..S3`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StokesMoments {
    pub means: [f64; 4],
    pub variances: [f64; 4],
    pub qnl: f64,
    /// `variances[i] / qnl`.
    pub normalized: [f64; 4],
    pub normalized_db: [f64; 4],
}

impl StokesMoments {
    fn from_parts(means: [f64; 4], variances: [f64; 4], qnl: f64) -> Self {
        let normalized = variances.map(|v| v / qnl);
        Self {
            means,
            variances,
            qnl,
            normalized,
            normalized_db: normalized.map(|v| 10.0 * v.log10()),
        }
    }
}

/// Mean Stokes vector `<S0>..<S3>` in photon-flux units.
pub fn stokes_means(state: &PolarizationState) -> [f64; 4] {
    let h = state.h_mode.mean();
    let v = state.v_lab().mean();
    let (ih, iv) = (h.norm_squared(), v.norm_squared());
    // <S2> = 2 Re(h* v), <S3> = 2 Im(h* v)
    [
        ih + iv,
        ih - iv,
        2.0 * (h.x * v.x + h.y * v.y),
        2.0 * (h.x * v.y - h.y * v.x),
    ]
}

/// Variances of the four Stokes operators.
///
/// Lock points use the closed forms; other phases need
/// [`PolarizationState::with_general_theta`].
pub fn stokes_variances(state: &PolarizationState) -> Result<StokesMoments> {
    let qnl = state.qnl();
    if qnl <= 0.0 {
        return Err(Error::DarkState);
    }
    let variances = match LockPoint::classify(state.theta) {
        Some(lock) => lock_point_variances(state, lock),
        None if state.general_theta => {
            let c = linearized_covariance(state);
            [c[(0, 0)], c[(1, 1)], c[(2, 2)], c[(3, 3)]]
        }
        None => return Err(Error::UnsupportedPhase(state.theta)),
    };
    Ok(StokesMoments::from_parts(stokes_means(state), variances, qnl))
}

fn lock_point_variances(state: &PolarizationState, lock: LockPoint) -> [f64; 4] {
    let (ah2, av2) = (state.h_mode.intensity(), state.v_mode.intensity());
    let h = state.h_mode.variances();
    let v = state.v_mode.variances();
    let v01 = ah2 * h.v_plus + av2 * v.v_plus;
    let amplitude_mix = av2 * h.v_plus + ah2 * v.v_plus;
    let phase_mix = av2 * h.v_minus + ah2 * v.v_minus;
    match lock {
        LockPoint::Zero => [v01, v01, amplitude_mix, phase_mix],
        LockPoint::HalfPi => [v01, v01, phase_mix, amplitude_mix],
    }
}

/// Full 4x4 covariance of the linearized Stokes fluctuations, valid at any
/// relative phase.
///
/// Each `dS_i` is a linear form `gH_i . dq_H + gV_i . dq_V` in the lab-frame
/// quadratures of the two modes; the modes are independent.
pub fn linearized_covariance(state: &PolarizationState) -> Matrix4<f64> {
    let h = state.h_mode.mean();
    let v_lab = state.v_lab();
    let v = v_lab.mean();
    let g_h = [
        Vector2::new(h.x, h.y),
        Vector2::new(h.x, h.y),
        Vector2::new(v.x, v.y),
        Vector2::new(v.y, -v.x),
    ];
    let g_v = [
        Vector2::new(v.x, v.y),
        Vector2::new(-v.x, -v.y),
        Vector2::new(h.x, h.y),
        Vector2::new(-h.y, h.x),
    ];
    let (cov_h, cov_v): (Matrix2<f64>, Matrix2<f64>) = (state.h_mode.cov(), v_lab.cov());
    Matrix4::from_fn(|i, j| g_h[i].dot(&(cov_h * g_h[j])) + g_v[i].dot(&(cov_v * g_v[j])))
}

/// A 2D ellipse: projection of the noise ellipsoid onto a coordinate plane.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionEllipse {
    /// Stokes indices spanning the plane, e.g. `(1, 2)` for S1-S2.
    pub plane: (usize, usize),
    pub semi_major: f64,
    pub semi_minor: f64,
    /// Angle of the major axis from the first axis of the plane, radians.
    pub angle: f64,
}

impl ProjectionEllipse {
    /// `n` points around the ellipse, relative to its centre.
    pub fn points(&self, n: usize) -> Vec<[f64; 2]> {
        let (s, c) = self.angle.sin_cos();
        (0..n)
            .map(|k| {
                let t = std::f64::consts::TAU * k as f64 / n as f64;
                let (u, w) = (self.semi_major * t.cos(), self.semi_minor * t.sin());
                [c * u - s * w, s * u + c * w]
            })
            .collect()
    }
}

/// Noise ellipsoid around the mean Stokes vector, in QNL-normalized
/// standard deviations. A coherent state gives the unit sphere.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseEllipsoid {
    /// Mean `(S1, S2, S3) / qnl`.
    pub center: [f64; 3],
    /// `sqrt(V1/qnl), sqrt(V2/qnl), sqrt(V3/qnl)`.
    pub semi_axes: [f64; 3],
    /// Principal standard deviations of the full (S1, S2, S3) covariance.
    pub principal_axes: [f64; 3],
    /// Principal directions, one per column, matching `principal_axes`.
    pub orientation: Matrix3<f64>,
    /// Projections onto the S1-S2, S2-S3 and S1-S3 planes.
    pub projections: [ProjectionEllipse; 3],
}

pub fn noise_ellipsoid(state: &PolarizationState) -> Result<NoiseEllipsoid> {
    let moments = stokes_variances(state)?;
    let qnl = moments.qnl;
    let full = linearized_covariance(state) / qnl;
    // keep the reported diagonal identical to the exact-path variances
    let mut cov = full.fixed_view::<3, 3>(1, 1).into_owned();
    for i in 0..3 {
        cov[(i, i)] = moments.normalized[i + 1];
    }

    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let principal_axes = order.map(|k| eig.eigenvalues[k].max(0.0).sqrt());
    let orientation = Matrix3::from_fn(|r, c| eig.eigenvectors[(r, order[c])]);

    let project = |a: usize, b: usize| {
        let m = Matrix2::new(cov[(a, a)], cov[(a, b)], cov[(b, a)], cov[(b, b)]);
        let e = SymmetricEigen::new(m);
        let (major, minor) = if e.eigenvalues[0] >= e.eigenvalues[1] {
            (0, 1)
        } else {
            (1, 0)
        };
        let dir = e.eigenvectors.column(major);
        ProjectionEllipse {
            plane: (a + 1, b + 1),
            semi_major: e.eigenvalues[major].max(0.0).sqrt(),
            semi_minor: e.eigenvalues[minor].max(0.0).sqrt(),
            angle: normalize_axis_angle(dir[1].atan2(dir[0])),
        }
    };

    Ok(NoiseEllipsoid {
        center: [moments.means[1] / qnl, moments.means[2] / qnl, moments.means[3] / qnl],
        semi_axes: [
            moments.normalized[1].sqrt(),
            moments.normalized[2].sqrt(),
            moments.normalized[3].sqrt(),
        ],
        principal_axes,
        orientation,
        projections: [project(0, 1), project(1, 2), project(0, 2)],
    })
}

/// Folds an axis direction into (-pi/2, pi/2].
fn normalize_axis_angle(mut a: f64) -> f64 {
    while a > FRAC_PI_2 {
        a -= std::f64::consts::PI;
    }
    while a <= -FRAC_PI_2 {
        a += std::f64::consts::PI;
    }
    a
}
