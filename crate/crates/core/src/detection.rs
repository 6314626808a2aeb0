//! Polarimetric detection: measurement stations, spectrum-analyzer
//! statistics, synthetic noise traces and a Monte Carlo oracle for the
//! analytic Stokes variances.
//!
//! Every stochastic function takes an explicit seed and owns its random
//! stream, so outputs are a pure function of `(inputs, seed)`.

use nalgebra::{Complex, Matrix2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use crate::error::{check_unit_fraction, Error, Result};
use crate::gaussian::{apply_loss, GaussianMode, QuadratureVariancePair};
use crate::stokes::{stokes_variances, PolarizationState};

/// Fraction of the RBW/VBW-limited sample count that is statistically
/// independent within one zero-span sweep. Chosen so 20 averages at
/// RBW = 100 kHz, VBW = 30 Hz give a standard error of about 0.04 dB.
pub const DWELL_FRACTION: f64 = 0.1767;

/// Smallest sample count accepted by the Monte Carlo oracle.
pub const MIN_MC_SAMPLES: usize = 10_000;

const DB_PER_LN: f64 = 10.0 / std::f64::consts::LN_10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Observable {
    S0,
    S1,
    S2,
    S3,
}

impl Observable {
    pub const ALL: [Observable; 4] = [Self::S0, Self::S1, Self::S2, Self::S3];

    pub fn index(self) -> usize {
        match self {
            Self::S0 => 0,
            Self::S1 => 1,
            Self::S2 => 2,
            Self::S3 => 3,
        }
    }

    pub fn name(self) -> &'static str {
        ["s0", "s1", "s2", "s3"][self.index()]
    }

    /// The station that measures this observable.
    pub fn station(self) -> StationKind {
        match self {
            Self::S0 | Self::S1 => StationKind::SumDiff,
            Self::S2 => StationKind::HalfWave,
            Self::S3 => StationKind::HalfPlusQuarterWave,
        }
    }
}

/// Optics in front of the PBS and photodiode pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StationKind {
    /// No waveplates: sum and difference photocurrents give S0 and S1.
    SumDiff,
    /// Half-wave plate rotating the polarization by 45 degrees: S2.
    HalfWave,
    /// Quarter-wave plate (pi/2 between s and p) then the half-wave plate: S3.
    HalfPlusQuarterWave,
}

impl StationKind {
    pub fn observables(self) -> &'static [Observable] {
        match self {
            Self::SumDiff => &[Observable::S0, Observable::S1],
            Self::HalfWave => &[Observable::S2],
            Self::HalfPlusQuarterWave => &[Observable::S3],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationSetting {
    pub kind: StationKind,
    pub detector_qe: f64,
}

/// One Stokes observable as read out by a station.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservableReading {
    pub observable: Observable,
    pub mean: f64,
    pub variance: f64,
    /// Variance over the shot-noise reference of the detected beam.
    pub normalized: f64,
    pub db: f64,
}

/// Reads a station: detector efficiency is applied to both modes as loss,
/// then the selected Stokes moments are taken. `SumDiff` yields S0 and S1.
pub fn station_reading(state: &PolarizationState, setting: &StationSetting) -> Result<Vec<ObservableReading>> {
    check_unit_fraction("detector_qe", setting.detector_qe)?;
    let detected = state.map_modes(|m| apply_loss(m, setting.detector_qe))?;
    let moments = stokes_variances(&detected)?;
    Ok(setting
        .kind
        .observables()
        .iter()
        .map(|&o| {
            let i = o.index();
            ObservableReading {
                observable: o,
                mean: moments.means[i],
                variance: moments.variances[i],
                normalized: moments.normalized[i],
                db: moments.normalized_db[i],
            }
        })
        .collect())
}

/// Quadrature variances a mode must carry before the detectors so that,
/// after loss `detector_qe`, it reads `detected`.
pub fn calibrate_input_variances(detected: QuadratureVariancePair, detector_qe: f64) -> Result<QuadratureVariancePair> {
    check_unit_fraction("detector_qe", detector_qe)?;
    let undo = |v: f64| 1.0 + (v - 1.0) / detector_qe;
    let input = QuadratureVariancePair::new(undo(detected.v_plus), undo(detected.v_minus))?;
    if input.product() < 1.0 - crate::gaussian::PHYSICALITY_TOL {
        return Err(Error::Unphysical(format!(
            "detected variances ({}, {}) need an input below the uncertainty bound at efficiency {}",
            detected.v_plus, detected.v_minus, detector_qe
        )));
    }
    Ok(input)
}

/// Spectrum-analyzer configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyzerSettings {
    /// MHz.
    pub center_frequency: f64,
    /// Resolution bandwidth, kHz.
    pub rbw: f64,
    /// Video bandwidth, Hz.
    pub vbw: f64,
    /// MHz; 0 selects zero-span mode.
    pub span: f64,
    pub n_average: usize,
    pub sweep_points: usize,
    /// Duration of one sweep, s.
    pub sweep_time: f64,
    /// Detector dark-noise power in dB relative to the QNL; `None` disables it.
    pub electronic_noise_floor_db: Option<f64>,
}

impl Default for AnalyzerSettings {
    fn default() -> Self {
        Self {
            center_frequency: 2.0,
            rbw: 100.0,
            vbw: 30.0,
            span: 0.0,
            n_average: 20,
            sweep_points: 401,
            sweep_time: 1.0,
            electronic_noise_floor_db: None,
        }
    }
}

impl AnalyzerSettings {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("center_frequency", self.center_frequency),
            ("rbw", self.rbw),
            ("vbw", self.vbw),
            ("sweep_time", self.sweep_time),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Domain {
                    name,
                    value: v,
                    domain: "(0, inf)",
                });
            }
        }
        if !(self.span.is_finite() && self.span >= 0.0) {
            return Err(Error::Domain {
                name: "span",
                value: self.span,
                domain: "[0, inf) MHz",
            });
        }
        if self.n_average < 1 {
            return Err(Error::Domain {
                name: "n_average",
                value: self.n_average as f64,
                domain: ">= 1",
            });
        }
        if self.sweep_points < 2 {
            return Err(Error::Domain {
                name: "sweep_points",
                value: self.sweep_points as f64,
                domain: ">= 2",
            });
        }
        if let Some(floor) = self.electronic_noise_floor_db {
            if !floor.is_finite() {
                return Err(Error::Domain {
                    name: "electronic_noise_floor_db",
                    value: floor,
                    domain: "finite dB",
                });
            }
        }
        Ok(())
    }

    /// Effective chi-square degrees of freedom of one sweep's reading.
    pub fn degrees_of_freedom(&self) -> f64 {
        let rbw_hz = self.rbw * 1e3;
        (2.0 * rbw_hz / self.vbw * DWELL_FRACTION).round().max(2.0)
    }

    fn floor_linear(&self) -> f64 {
        self.electronic_noise_floor_db.map_or(0.0, |db| 10f64.powf(db / 10.0))
    }

    fn require_zero_span(&self) -> Result<()> {
        if self.span != 0.0 {
            return Err(Error::Domain {
                name: "span",
                value: self.span,
                domain: "0 (zero-span mode)",
            });
        }
        Ok(())
    }

    fn sample_times(&self) -> impl Iterator<Item = f64> + '_ {
        let dt = self.sweep_time / (self.sweep_points - 1) as f64;
        (0..self.sweep_points).map(move |i| i as f64 * dt)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceAxis {
    /// Scanned local-oscillator phase, rad.
    Phase,
    /// Zero-span time, s.
    Time,
}

/// Noise power versus phase or time, in dB relative to the QNL.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseTrace {
    pub axis: TraceAxis,
    pub x_values: Vec<f64>,
    pub y_db: Vec<f64>,
    pub settings: AnalyzerSettings,
    pub seed: u64,
    /// Always 0: traces are QNL-normalized.
    pub qnl_reference_db: f64,
}

fn analyzer_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn chi_square(dof: f64) -> ChiSquared<f64> {
    ChiSquared::new(dof).expect("degrees of freedom are >= 2")
}

/// Zero-span trace while the local-oscillator phase is scanned:
/// `V(phi) = V_min cos^2 phi + V_max sin^2 phi`, `phi = phase_rate * t`.
///
/// Each point is the average of `n_average` sweeps.
pub fn scanned_trace(
    v_min_db: f64,
    v_max_db: f64,
    settings: &AnalyzerSettings,
    phase_rate: f64,
    seed: u64,
) -> Result<NoiseTrace> {
    settings.validate()?;
    settings.require_zero_span()?;
    if !(v_min_db.is_finite() && v_max_db.is_finite()) || v_min_db > v_max_db {
        return Err(Error::Domain {
            name: "v_min_db",
            value: v_min_db,
            domain: "finite and <= v_max_db",
        });
    }
    if !phase_rate.is_finite() {
        return Err(Error::Domain {
            name: "phase_rate",
            value: phase_rate,
            domain: "finite rad/s",
        });
    }
    let (v_min, v_max) = (10f64.powf(v_min_db / 10.0), 10f64.powf(v_max_db / 10.0));
    let dof = settings.degrees_of_freedom() * settings.n_average as f64;
    let chi = chi_square(dof);
    let floor = settings.floor_linear();
    let mut rng = analyzer_rng(seed);

    let mut x_values = Vec::with_capacity(settings.sweep_points);
    let mut y_db = Vec::with_capacity(settings.sweep_points);
    for t in settings.sample_times() {
        let phi = phase_rate * t;
        let (s, c) = phi.sin_cos();
        let power = v_min * c * c + v_max * s * s;
        let reading = power * chi.sample(&mut rng) / dof + floor;
        x_values.push(phi);
        y_db.push(10.0 * reading.log10());
    }
    Ok(NoiseTrace {
        axis: TraceAxis::Phase,
        x_values,
        y_db,
        settings: *settings,
        seed,
        qnl_reference_db: 0.0,
    })
}

/// Zero-span trace of a locked, stationary noise level.
pub fn zero_span_trace(variance_normalized: f64, settings: &AnalyzerSettings, seed: u64) -> Result<NoiseTrace> {
    check_variance(variance_normalized)?;
    settings.validate()?;
    settings.require_zero_span()?;
    let dof = settings.degrees_of_freedom() * settings.n_average as f64;
    let chi = chi_square(dof);
    let floor = settings.floor_linear();
    let mut rng = analyzer_rng(seed);
    let x_values: Vec<f64> = settings.sample_times().collect();
    let y_db = x_values
        .iter()
        .map(|_| 10.0 * (variance_normalized * chi.sample(&mut rng) / dof + floor).log10())
        .collect();
    Ok(NoiseTrace {
        axis: TraceAxis::Time,
        x_values,
        y_db,
        settings: *settings,
        seed,
        qnl_reference_db: 0.0,
    })
}

/// Averaged zero-span reading with its standard error.
#[derive(Debug, Clone, PartialEq)]
pub struct ZeroSpanResult {
    pub mean_db: f64,
    pub stderr_db: f64,
    /// Individual sweep readings, linear, QNL-normalized.
    pub sweeps: Vec<f64>,
}

/// Simulates `n_average` zero-span sweeps of a noise level and averages them.
///
/// Each sweep reads `V * chi2_k / k` (plus the electronic floor if enabled).
/// The mean is taken in linear power; the standard error is propagated to dB.
/// With a single sweep the standard error falls back to the model value
/// `sqrt(2/k)`.
pub fn zero_span_measurement(
    variance_normalized: f64,
    settings: &AnalyzerSettings,
    seed: u64,
) -> Result<ZeroSpanResult> {
    check_variance(variance_normalized)?;
    settings.validate()?;
    settings.require_zero_span()?;
    let k = settings.degrees_of_freedom();
    let chi = chi_square(k);
    let floor = settings.floor_linear();
    let mut rng = analyzer_rng(seed);
    let sweeps: Vec<f64> = (0..settings.n_average)
        .map(|_| variance_normalized * chi.sample(&mut rng) / k + floor)
        .collect();

    let n = sweeps.len() as f64;
    let mean = sweeps.iter().sum::<f64>() / n;
    let rel_stderr = if sweeps.len() > 1 {
        let var = sweeps.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (n - 1.0);
        var.sqrt() / n.sqrt() / mean
    } else {
        (2.0 / k).sqrt()
    };
    Ok(ZeroSpanResult {
        mean_db: 10.0 * mean.log10(),
        stderr_db: DB_PER_LN * rel_stderr,
        sweeps,
    })
}

fn check_variance(v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain {
            name: "variance_normalized",
            value: v,
            domain: "(0, inf)",
        })
    }
}

/// Sample variances of the four Stokes observables.
#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloStokes {
    pub n_samples: usize,
    pub qnl: f64,
    pub means: [f64; 4],
    pub variances: [f64; 4],
    /// Standard error of each sample variance (Gaussian estimate).
    pub variance_stderr: [f64; 4],
    pub normalized: [f64; 4],
    pub normalized_stderr: [f64; 4],
}

impl MonteCarloStokes {
    /// `(sampled - reference) / stderr` for normalized variances.
    pub fn z_scores(&self, reference_normalized: &[f64; 4]) -> [f64; 4] {
        std::array::from_fn(|i| (self.normalized[i] - reference_normalized[i]) / self.normalized_stderr[i])
    }
}

/// Monte Carlo estimate with the canonical single shard.
pub fn monte_carlo_stokes(state: &PolarizationState, n_samples: usize, seed: u64) -> Result<MonteCarloStokes> {
    monte_carlo_stokes_sharded(state, n_samples, seed, 1)
}

/// Monte Carlo estimate of the Stokes variances by sampling both modes and
/// passing the fields through the waveplates and PBS of each station.
///
/// Photocurrents are linearized around the mean fields,
/// `n = |b|^2 + 2 Re(b* db)`. Shard `s` draws from stream `s` of the
/// ChaCha generator seeded with `seed`; results are bit-identical for a
/// fixed shard count.
pub fn monte_carlo_stokes_sharded(
    state: &PolarizationState,
    n_samples: usize,
    seed: u64,
    shards: usize,
) -> Result<MonteCarloStokes> {
    if n_samples < MIN_MC_SAMPLES {
        return Err(Error::TooFewSamples {
            min: MIN_MC_SAMPLES,
            got: n_samples,
        });
    }
    if shards == 0 || shards > n_samples {
        return Err(Error::Domain {
            name: "shards",
            value: shards as f64,
            domain: "[1, n_samples]",
        });
    }
    let sampler = FieldSampler::new(state)?;
    let qnl = sampler.qnl();
    if qnl <= 0.0 {
        return Err(Error::DarkState);
    }

    let per_shard = |s: usize| n_samples / shards + usize::from(s < n_samples % shards);
    let accumulators: Vec<[Welford; 4]> = if shards == 1 {
        vec![sampler.run(n_samples, seed, 0)]
    } else {
        std::thread::scope(|scope| {
            let handles: Vec<_> = (0..shards)
                .map(|s| {
                    let sampler = &sampler;
                    scope.spawn(move || sampler.run(per_shard(s), seed, s as u64))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("Monte Carlo shard panicked"))
                .collect()
        })
    };

    let mut total = [Welford::default(); 4];
    for acc in &accumulators {
        for (t, a) in total.iter_mut().zip(acc) {
            t.merge(a);
        }
    }
    let n = n_samples as f64;
    let variances = total.map(|w| w.variance());
    let variance_stderr = variances.map(|v| v * (2.0 / (n - 1.0)).sqrt());
    Ok(MonteCarloStokes {
        n_samples,
        qnl,
        means: total.map(|w| w.mean),
        variances,
        variance_stderr,
        normalized: variances.map(|v| v / qnl),
        normalized_stderr: variance_stderr.map(|e| e / qnl),
    })
}

/// Draws field amplitudes for the two modes and forms station photocurrents.
struct FieldSampler {
    h_mean: Complex<f64>,
    v_mean: Complex<f64>,
    h_chol: Matrix2<f64>,
    v_chol: Matrix2<f64>,
    /// Relative phase factor applied to every V-mode sample.
    v_phase: Complex<f64>,
}

impl FieldSampler {
    fn new(state: &PolarizationState) -> Result<Self> {
        let chol = |m: &GaussianMode| {
            m.cov()
                .cholesky()
                .map(|c| c.l())
                .ok_or_else(|| Error::Unphysical("covariance has no Cholesky factor".into()))
        };
        let (h, v) = (state.h_mode(), state.v_mode());
        Ok(Self {
            h_mean: Complex::new(h.mean_x(), h.mean_p()),
            v_mean: Complex::new(v.mean_x(), v.mean_p()),
            h_chol: chol(h)?,
            v_chol: chol(v)?,
            v_phase: Complex::from_polar(1.0, state.theta()),
        })
    }

    fn qnl(&self) -> f64 {
        self.h_mean.norm_sqr() + self.v_mean.norm_sqr()
    }

    /// Quadrature noise `(dx, dp)` maps to the field fluctuation `(dx + i dp) / 2`.
    fn draw(chol: &Matrix2<f64>, rng: &mut ChaCha8Rng) -> Complex<f64> {
        let z0: f64 = StandardNormal.sample(rng);
        let z1: f64 = StandardNormal.sample(rng);
        let dx = chol[(0, 0)] * z0;
        let dp = chol[(1, 0)] * z0 + chol[(1, 1)] * z1;
        Complex::new(dx, dp) * 0.5
    }

    fn run(&self, n: usize, seed: u64, stream: u64) -> [Welford; 4] {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let mut acc = [Welford::default(); 4];

        let h0 = self.h_mean;
        let v0 = self.v_mean * self.v_phase;
        let root_half = std::f64::consts::FRAC_1_SQRT_2;
        let minus_i = Complex::new(0.0, -1.0);
        // mean fields behind each station's optics
        let hw = [(h0 + v0) * root_half, (h0 - v0) * root_half];
        let qw = [(h0 + minus_i * v0) * root_half, (h0 - minus_i * v0) * root_half];

        for _ in 0..n {
            let dh = Self::draw(&self.h_chol, &mut rng);
            let dv = Self::draw(&self.v_chol, &mut rng) * self.v_phase;

            let n_h = photocurrent(h0, dh);
            let n_v = photocurrent(v0, dv);
            let s2 = photocurrent(hw[0], (dh + dv) * root_half) - photocurrent(hw[1], (dh - dv) * root_half);
            let dv_q = minus_i * dv;
            let s3 = photocurrent(qw[0], (dh + dv_q) * root_half) - photocurrent(qw[1], (dh - dv_q) * root_half);

            acc[0].push(n_h + n_v);
            acc[1].push(n_h - n_v);
            acc[2].push(s2);
            acc[3].push(s3);
        }
        acc
    }
}

/// Linearized photon flux of a field with mean `b` and fluctuation `db`.
fn photocurrent(b: Complex<f64>, db: Complex<f64>) -> f64 {
    b.norm_sqr() + 2.0 * (b.conj() * db).re
}

/// Running mean and variance (Welford), mergeable across shards.
#[derive(Debug, Clone, Copy, Default)]
struct Welford {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn push(&mut self, x: f64) {
        self.n += 1.0;
        let d = x - self.mean;
        self.mean += d / self.n;
        self.m2 += d * (x - self.mean);
    }

    fn merge(&mut self, other: &Welford) {
        if other.n == 0.0 {
            return;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        self.mean += d * other.n / n;
        self.m2 += other.m2 + d * d * self.n * other.n / n;
        self.n = n;
    }

    fn variance(&self) -> f64 {
        self.m2 / (self.n - 1.0)
    }
}
