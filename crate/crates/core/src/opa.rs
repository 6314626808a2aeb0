//! Below-threshold degenerate OPA: classical gain, squeezing spectra and the
//! detection efficiency budget.
//!
//! The pump parameter is `x = sqrt(P / P_th)`. Classical seed gains are
//! `1/(1-x)^2` (amplification) and `1/(1+x)^2` (de-amplification), and the
//! output quadrature variances at normalized sideband frequency `w` are
//!
//! ```text
//! V-/+ = 1 -/+ eta * 4x / ((1 +/- x)^2 + w^2)
//! ```
//!
//! with `eta` the product of escape and downstream efficiencies.

use crate::error::{check_closed, check_finite, check_unit_fraction, Error, Result};
use crate::gaussian::{apply_loss, GaussianMode, QuadratureVariancePair};

/// Speed of light, m/s.
const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Upper end of the pump-parameter search interval used by the gain fit.
pub const FIT_X_MAX: f64 = 0.999;

/// Operating point of the OPA cavity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpaConfig {
    /// Pump power, mW.
    pub pump_power: f64,
    /// Oscillation threshold, mW.
    pub threshold_power: f64,
    /// Cavity half-linewidth (HWHM), MHz.
    pub cavity_hwhm: f64,
    /// Sideband analysis frequency, MHz.
    pub analysis_frequency: f64,
}

impl OpaConfig {
    pub fn new(pump_power: f64, threshold_power: f64, cavity_hwhm: f64, analysis_frequency: f64) -> Result<Self> {
        let cfg = Self {
            pump_power,
            threshold_power,
            cavity_hwhm,
            analysis_frequency,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        pump_parameter(self.pump_power, self.threshold_power)?;
        if !(self.cavity_hwhm.is_finite() && self.cavity_hwhm > 0.0) {
            return Err(Error::Domain {
                name: "cavity_hwhm",
                value: self.cavity_hwhm,
                domain: "(0, inf) MHz",
            });
        }
        if !(self.analysis_frequency.is_finite() && self.analysis_frequency >= 0.0) {
            return Err(Error::Domain {
                name: "analysis_frequency",
                value: self.analysis_frequency,
                domain: "[0, inf) MHz",
            });
        }
        Ok(())
    }

    pub fn pump_parameter(&self) -> Result<f64> {
        pump_parameter(self.pump_power, self.threshold_power)
    }

    /// Analysis frequency in units of the cavity half-linewidth.
    pub fn omega_norm(&self) -> f64 {
        self.analysis_frequency / self.cavity_hwhm
    }
}

impl Default for OpaConfig {
    /// 49 mW pump with the threshold placed so that de-amplification is 0.47;
    /// 2 MHz analysis frequency on a 5 MHz half-linewidth cavity.
    fn default() -> Self {
        Self {
            pump_power: 49.0,
            threshold_power: threshold_from_deamplification(49.0, 0.47).expect("default de-amplification is in range"),
            cavity_hwhm: 5.0,
            analysis_frequency: 2.0,
        }
    }
}

/// Efficiencies between the OPA crystal and the photocurrent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EfficiencyBudget {
    pub detector_qe: f64,
    pub escape: f64,
    pub propagation: f64,
    /// Interference visibility; enters the total squared.
    pub visibility: f64,
}

impl EfficiencyBudget {
    pub fn new(detector_qe: f64, escape: f64, propagation: f64, visibility: f64) -> Result<Self> {
        let b = Self {
            detector_qe,
            escape,
            propagation,
            visibility,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        check_unit_fraction("detector_qe", self.detector_qe)?;
        check_unit_fraction("escape", self.escape)?;
        check_unit_fraction("propagation", self.propagation)?;
        check_unit_fraction("visibility", self.visibility)?;
        Ok(())
    }

    /// `detector_qe * escape * propagation * visibility^2`.
    pub fn total(&self) -> f64 {
        self.detector_qe * self.escape * self.propagation * self.visibility * self.visibility
    }
}

impl Default for EfficiencyBudget {
    fn default() -> Self {
        Self {
            detector_qe: 0.95,
            escape: 0.966,
            propagation: 0.99,
            visibility: 0.997,
        }
    }
}

/// Classical seed gains for the two locking phases of the pump.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainPair {
    pub amplification: f64,
    pub deamplification: f64,
}

/// Result of [`fit_pump_parameter`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PumpFit {
    pub x: f64,
    /// Model gains at the fitted `x`.
    pub model: GainPair,
    /// Sum of squared gain residuals at the optimum.
    pub residual: f64,
}

/// `x = sqrt(pump_power / threshold_power)`.
pub fn pump_parameter(pump_power: f64, threshold_power: f64) -> Result<f64> {
    if !(pump_power.is_finite() && pump_power >= 0.0) {
        return Err(Error::Domain {
            name: "pump_power",
            value: pump_power,
            domain: "[0, inf) mW",
        });
    }
    if !(threshold_power.is_finite() && threshold_power > 0.0) {
        return Err(Error::Domain {
            name: "threshold_power",
            value: threshold_power,
            domain: "(0, inf) mW",
        });
    }
    if pump_power >= threshold_power {
        return Err(Error::AboveThreshold {
            pump_power,
            threshold_power,
        });
    }
    Ok((pump_power / threshold_power).sqrt())
}

/// Threshold power at which `pump_power` yields the given de-amplification.
pub fn threshold_from_deamplification(pump_power: f64, deamplification: f64) -> Result<f64> {
    check_finite("pump_power", pump_power)?;
    if !(deamplification > 0.25 && deamplification < 1.0) {
        return Err(Error::Domain {
            name: "deamplification",
            value: deamplification,
            domain: "(0.25, 1)",
        });
    }
    let x = 1.0 / deamplification.sqrt() - 1.0;
    Ok(pump_power / (x * x))
}

fn check_pump_parameter(x: f64) -> Result<f64> {
    if x.is_finite() && (0.0..1.0).contains(&x) {
        Ok(x)
    } else {
        Err(Error::Domain {
            name: "x",
            value: x,
            domain: "[0, 1)",
        })
    }
}

pub fn classical_gains(x: f64) -> Result<GainPair> {
    check_pump_parameter(x)?;
    Ok(GainPair {
        amplification: 1.0 / ((1.0 - x) * (1.0 - x)),
        deamplification: 1.0 / ((1.0 + x) * (1.0 + x)),
    })
}

fn gain_residual(x: f64, measured: &GainPair) -> f64 {
    let amp = 1.0 / ((1.0 - x) * (1.0 - x)) - measured.amplification;
    let deamp = 1.0 / ((1.0 + x) * (1.0 + x)) - measured.deamplification;
    amp * amp + deamp * deamp
}

/// Least-squares pump parameter for a measured gain pair.
///
/// Both gains are weighted equally. A fixed grid over `[0, FIT_X_MAX]`
/// brackets the minimum, then golden-section search narrows it to ~1e-12.
pub fn fit_pump_parameter(measured: &GainPair) -> Result<PumpFit> {
    for (name, v) in [
        ("amplification", measured.amplification),
        ("deamplification", measured.deamplification),
    ] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::Domain {
                name,
                value: v,
                domain: "(0, inf)",
            });
        }
    }

    const GRID: usize = 4000;
    let step = FIT_X_MAX / GRID as f64;
    let best = (0..=GRID)
        .map(|i| (i, gain_residual(i as f64 * step, measured)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);

    let mut lo = best.saturating_sub(1) as f64 * step;
    let mut hi = ((best + 1).min(GRID) as f64 * step).min(FIT_X_MAX);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - inv_phi * (hi - lo);
    let mut b = lo + inv_phi * (hi - lo);
    let (mut fa, mut fb) = (gain_residual(a, measured), gain_residual(b, measured));
    while hi - lo > 1e-12 {
        if fa < fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - inv_phi * (hi - lo);
            fa = gain_residual(a, measured);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + inv_phi * (hi - lo);
            fb = gain_residual(b, measured);
        }
    }
    // the bracket may touch x = 0; compare against the end points explicitly
    let x = [lo, 0.5 * (lo + hi), hi]
        .into_iter()
        .min_by(|p, q| gain_residual(*p, measured).total_cmp(&gain_residual(*q, measured)))
        .unwrap_or(lo);

    Ok(PumpFit {
        x,
        model: classical_gains(x)?,
        residual: gain_residual(x, measured),
    })
}

/// Quadrature variances leaving the OPA at sideband frequency `omega_norm`
/// (in half-linewidths), with cavity escape efficiency `escape`.
pub fn squeezing_spectrum(x: f64, omega_norm: f64, escape: f64) -> Result<QuadratureVariancePair> {
    check_pump_parameter(x)?;
    if !(omega_norm.is_finite() && omega_norm >= 0.0) {
        return Err(Error::Domain {
            name: "omega_norm",
            value: omega_norm,
            domain: "[0, inf)",
        });
    }
    check_unit_fraction("escape", escape)?;
    let w2 = omega_norm * omega_norm;
    // 1 - 4ex/((1+x)^2+w2) rearranged to avoid cancellation near threshold
    let v_plus = ((1.0 - x) * (1.0 - x) + w2 + 4.0 * x * (1.0 - escape)) / ((1.0 + x) * (1.0 + x) + w2);
    let v_minus = 1.0 + escape * 4.0 * x / ((1.0 - x) * (1.0 - x) + w2);
    QuadratureVariancePair::new(v_plus, v_minus)
}

/// Variances as seen by the detectors: the lossless OPA spectrum degraded by
/// the whole efficiency budget (escape included).
pub fn detected_variances(cfg: &OpaConfig, budget: &EfficiencyBudget) -> Result<QuadratureVariancePair> {
    cfg.validate()?;
    budget.validate()?;
    let ideal = squeezing_spectrum(cfg.pump_parameter()?, cfg.omega_norm(), 1.0)?;
    let mode = GaussianMode::from_variances(ideal, 0.0, 0.0)?;
    Ok(apply_loss(&mode, budget.total())?.variances())
}

pub fn efficiency_total(budget: &EfficiencyBudget) -> Result<f64> {
    budget.validate()?;
    Ok(budget.total())
}

/// Cavity half-linewidth in MHz: `FSR (T + L) / (4 pi)`, `FSR = c / length`.
pub fn cavity_hwhm(round_trip_length_mm: f64, coupler_transmissivity: f64, intracavity_loss: f64) -> Result<f64> {
    if !(round_trip_length_mm.is_finite() && round_trip_length_mm > 0.0) {
        return Err(Error::Domain {
            name: "round_trip_length",
            value: round_trip_length_mm,
            domain: "(0, inf) mm",
        });
    }
    check_closed("coupler_transmissivity", coupler_transmissivity, 0.0, 1.0, "[0, 1)")?;
    check_closed("intracavity_loss", intracavity_loss, 0.0, 1.0, "[0, 1)")?;
    if coupler_transmissivity == 1.0 || intracavity_loss == 1.0 {
        return Err(Error::Domain {
            name: "coupler_transmissivity + intracavity_loss",
            value: 1.0,
            domain: "[0, 1)",
        });
    }
    let fsr_mhz = SPEED_OF_LIGHT / (round_trip_length_mm * 1e-3) / 1e6;
    Ok(fsr_mhz * (coupler_transmissivity + intracavity_loss) / (4.0 * std::f64::consts::PI))
}
