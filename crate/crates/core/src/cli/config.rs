//! Line-based configuration format.
//!
//! ```text
//! # comment
//! seed = 0
//!
//! [opa]
//! pump_power = 49          # trailing comments are allowed
//!
//! [state]
//! theta = pi/2
//! ```
//!
//! - One `key = value` per line; blank lines and `#` comments are ignored.
//! - `[section]` starts a section. `seed` is the only key outside a section.
//! - Every key belongs to exactly one section. Unknown sections, unknown
//!   keys, keys in the wrong section and repeated keys are errors.
//! - Angles (`theta`, `phase_rate`) accept `pi` expressions: `pi`, `pi/2`,
//!   `2*pi`, `-pi/4`, `8pi`.
//! - Missing keys keep their defaults. An empty file is the default run.
//!
//! Key names double as command-line flags: `--pump_power 49` sets the same
//! field as `pump_power = 49` in `[opa]`.

use std::f64::consts::PI;
use std::path::Path;

use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::detection::{calibrate_input_variances, AnalyzerSettings, Observable, MIN_MC_SAMPLES};
use crate::error::Error as ModelError;
use crate::gaussian::{variance_from_db, GaussianMode, QuadratureVariancePair};
use crate::opa::{EfficiencyBudget, GainPair, OpaConfig};
use crate::stokes::{build_polarization_state, LockPoint, PolarizationState};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{}unknown key `{key}`{}", .line.map(|l| format!("line {l}: ")).unwrap_or_default(), .hint)]
    UnknownKey {
        line: Option<usize>,
        key: String,
        hint: String,
    },
    #[error("invalid value for `{key}`: {message}")]
    Validation { key: String, message: String },
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy)]
enum Kind {
    Real,
    Angle,
    Count,
    Bool,
    Floor,
    TraceMode,
    Observable,
}

struct KeySpec {
    section: &'static str,
    key: &'static str,
    kind: Kind,
    help: &'static str,
}

const fn spec(section: &'static str, key: &'static str, kind: Kind, help: &'static str) -> KeySpec {
    KeySpec {
        section,
        key,
        kind,
        help,
    }
}

/// Sections in file order; `""` is the top level.
pub const SECTIONS: [&str; 9] = [
    "",
    "opa",
    "budget",
    "state",
    "analyzer",
    "trace",
    "montecarlo",
    "fit",
    "ellipsoid",
];

static KEYS: &[KeySpec] = &[
    spec("", "seed", Kind::Count, "seed for every stochastic step"),
    spec("opa", "pump_power", Kind::Real, "OPA pump power, mW"),
    spec("opa", "threshold_power", Kind::Real, "OPA threshold, mW"),
    spec("opa", "cavity_hwhm", Kind::Real, "OPA cavity half-linewidth, MHz"),
    spec(
        "opa",
        "analysis_frequency",
        Kind::Real,
        "sideband analysis frequency, MHz",
    ),
    spec(
        "opa",
        "spectrum_max_frequency",
        Kind::Real,
        "upper end of the `opa` spectrum table, MHz",
    ),
    spec(
        "opa",
        "spectrum_points",
        Kind::Count,
        "rows in the `opa` spectrum table",
    ),
    spec("budget", "detector_qe", Kind::Real, "photodiode quantum efficiency"),
    spec("budget", "escape", Kind::Real, "OPA escape efficiency"),
    spec("budget", "propagation", Kind::Real, "propagation efficiency"),
    spec(
        "budget",
        "visibility",
        Kind::Real,
        "interference visibility (enters squared)",
    ),
    spec(
        "state",
        "alpha_h",
        Kind::Real,
        "coherent amplitude of the bright H mode",
    ),
    spec(
        "state",
        "alpha_v",
        Kind::Real,
        "coherent amplitude of the squeezed V mode",
    ),
    spec("state", "theta", Kind::Angle, "relative H/V phase, rad (0 or pi/2)"),
    spec(
        "state",
        "allow_general_theta",
        Kind::Bool,
        "allow phases other than 0 and pi/2",
    ),
    spec(
        "state",
        "excess_noise_h",
        Kind::Real,
        "classical amplitude noise on H, QNL units",
    ),
    spec(
        "state",
        "excess_noise_v",
        Kind::Real,
        "classical amplitude noise on V, QNL units",
    ),
    spec(
        "state",
        "squeezing_db",
        Kind::Real,
        "detected V-mode amplitude-quadrature level, dB",
    ),
    spec(
        "state",
        "antisqueezing_db",
        Kind::Real,
        "detected V-mode phase-quadrature level, dB",
    ),
    spec(
        "analyzer",
        "center_frequency",
        Kind::Real,
        "analyzer centre frequency, MHz",
    ),
    spec("analyzer", "rbw", Kind::Real, "resolution bandwidth, kHz"),
    spec("analyzer", "vbw", Kind::Real, "video bandwidth, Hz"),
    spec("analyzer", "span", Kind::Real, "span, MHz (0 = zero span)"),
    spec("analyzer", "n_average", Kind::Count, "sweeps averaged per reading"),
    spec("analyzer", "sweep_points", Kind::Count, "points per sweep"),
    spec("analyzer", "sweep_time", Kind::Real, "sweep duration, s"),
    spec(
        "analyzer",
        "electronic_noise_floor_db",
        Kind::Floor,
        "dark-noise power relative to QNL, dB, or `off`",
    ),
    spec("trace", "mode", Kind::TraceMode, "`scan` (phase scanned) or `locked`"),
    spec(
        "trace",
        "observable",
        Kind::Observable,
        "Stokes parameter for locked traces: s0..s3",
    ),
    spec("trace", "v_min_db", Kind::Real, "scanned trace minimum, dB"),
    spec("trace", "v_max_db", Kind::Real, "scanned trace maximum, dB"),
    spec(
        "trace",
        "phase_rate",
        Kind::Angle,
        "local-oscillator phase scan rate, rad/s",
    ),
    spec("montecarlo", "samples", Kind::Count, "Monte Carlo sample count"),
    spec("montecarlo", "shards", Kind::Count, "Monte Carlo worker shards"),
    spec("fit", "amp", Kind::Real, "measured classical amplification"),
    spec("fit", "deamp", Kind::Real, "measured classical de-amplification"),
    spec(
        "ellipsoid",
        "ellipse_points",
        Kind::Count,
        "points per projection ellipse",
    ),
];

/// `(key, section, help)` for every configuration key.
pub fn keys() -> impl Iterator<Item = (&'static str, &'static str, &'static str)> {
    KEYS.iter().map(|k| (k.key, k.section, k.help))
}

fn lookup(key: &str) -> Option<&'static KeySpec> {
    KEYS.iter().find(|k| k.key == key)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceMode {
    Scan,
    Locked,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateConfig {
    pub alpha_h: f64,
    pub alpha_v: f64,
    pub theta: f64,
    pub allow_general_theta: bool,
    pub excess_noise_h: f64,
    pub excess_noise_v: f64,
    pub squeezing_db: f64,
    pub antisqueezing_db: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceConfig {
    pub mode: TraceMode,
    pub observable: Observable,
    pub v_min_db: f64,
    pub v_max_db: f64,
    pub phase_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Config {
    pub seed: u64,
    pub opa: OpaConfig,
    pub spectrum_max_frequency: f64,
    pub spectrum_points: usize,
    pub budget: EfficiencyBudget,
    pub state: StateConfig,
    pub analyzer: AnalyzerSettings,
    pub trace: TraceConfig,
    pub mc_samples: usize,
    pub mc_shards: usize,
    pub fit: GainPair,
    pub ellipse_points: usize,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            seed: 0,
            opa: OpaConfig::default(),
            spectrum_max_frequency: 20.0,
            spectrum_points: 41,
            budget: EfficiencyBudget::default(),
            state: StateConfig {
                alpha_h: 10.0,
                alpha_v: 0.0,
                theta: 0.0,
                allow_general_theta: false,
                excess_noise_h: 0.0,
                excess_noise_v: 0.0,
                squeezing_db: -3.8,
                antisqueezing_db: 5.0,
            },
            analyzer: AnalyzerSettings::default(),
            trace: TraceConfig {
                mode: TraceMode::Scan,
                observable: Observable::S2,
                v_min_db: -4.1,
                v_max_db: 5.3,
                phase_rate: 8.0 * PI,
            },
            mc_samples: 1_000_000,
            mc_shards: 1,
            fit: GainPair {
                amplification: 3.2,
                deamplification: 0.47,
            },
            ellipse_points: 73,
        }
    }
}

fn parse_real(raw: &str) -> Result<f64, String> {
    raw.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| format!("expected a finite real number, got `{raw}`"))
}

/// Real number or `[-][k][*]pi[/m]`.
fn parse_angle(raw: &str) -> Result<f64, String> {
    if let Ok(v) = parse_real(raw) {
        return Ok(v);
    }
    let err = || format!("expected a real number or a pi expression like `pi/2`, got `{raw}`");
    let compact: String = raw.chars().filter(|c| !c.is_whitespace()).collect();
    let (sign, body) = match compact.strip_prefix('-') {
        Some(rest) => (-1.0, rest),
        None => (1.0, compact.as_str()),
    };
    let (num, den) = match body.split_once('/') {
        Some((n, d)) => (n, Some(d)),
        None => (body, None),
    };
    let factor = num.strip_suffix("pi").ok_or_else(err)?;
    let factor = factor.strip_suffix('*').unwrap_or(factor);
    let k = if factor.is_empty() {
        1.0
    } else {
        parse_real(factor).map_err(|_| err())?
    };
    let m = match den {
        Some(d) => parse_real(d).ok().filter(|m| *m != 0.0).ok_or_else(err)?,
        None => 1.0,
    };
    Ok(sign * k * PI / m)
}

fn parse_count(raw: &str) -> Result<u64, String> {
    raw.parse::<u64>()
        .map_err(|_| format!("expected a non-negative integer, got `{raw}`"))
}

fn parse_usize(raw: &str) -> Result<usize, String> {
    parse_count(raw).and_then(|v| usize::try_from(v).map_err(|_| format!("`{raw}` is too large")))
}

fn parse_bool(raw: &str) -> Result<bool, String> {
    match raw {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(format!("expected `true` or `false`, got `{raw}`")),
    }
}

impl Config {
    /// Reads and validates a configuration file.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut cfg = Self::default();
        cfg.apply_text(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parses and validates configuration text on top of the defaults.
    pub fn from_text(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies the assignments in `text` without validating the result.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        let mut section = "";
        let mut seen: Vec<&'static str> = Vec::new();
        for (idx, raw_line) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw_line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(rest) = content.strip_prefix('[') {
                let name = rest.strip_suffix(']').ok_or_else(|| ConfigError::Parse {
                    line,
                    message: format!("malformed section header `{content}`"),
                })?;
                let name = name.trim();
                section = SECTIONS
                    .iter()
                    .copied()
                    .find(|s| !s.is_empty() && *s == name)
                    .ok_or_else(|| ConfigError::Parse {
                        line,
                        message: format!("unknown section [{name}]"),
                    })?;
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| ConfigError::Parse {
                line,
                message: format!("expected `key = value`, got `{content}`"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() {
                return Err(ConfigError::Parse {
                    line,
                    message: "missing key before `=`".into(),
                });
            }
            let spec = match lookup(key) {
                Some(s) if s.section == section => s,
                Some(s) => {
                    return Err(ConfigError::UnknownKey {
                        line: Some(line),
                        key: key.into(),
                        hint: if s.section.is_empty() {
                            format!(" in [{section}] (it belongs at the top level)")
                        } else {
                            format!(" in {} (it belongs in [{}])", section_label(section), s.section)
                        },
                    })
                }
                None => {
                    return Err(ConfigError::UnknownKey {
                        line: Some(line),
                        key: key.into(),
                        hint: String::new(),
                    })
                }
            };
            if seen.contains(&spec.key) {
                return Err(ConfigError::Parse {
                    line,
                    message: format!("`{key}` is set twice"),
                });
            }
            seen.push(spec.key);
            self.set_spec(spec, value).map_err(|message| ConfigError::Parse {
                line,
                message: format!("`{key}`: {message}"),
            })?;
        }
        Ok(())
    }

    /// Sets one key from its textual value, as a flag override would.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let spec = lookup(key).ok_or_else(|| ConfigError::UnknownKey {
            line: None,
            key: key.into(),
            hint: String::new(),
        })?;
        self.set_spec(spec, value.trim())
            .map_err(|message| ConfigError::Validation {
                key: key.into(),
                message,
            })
    }

    fn set_spec(&mut self, spec: &KeySpec, raw: &str) -> Result<(), String> {
        let real = || match spec.kind {
            Kind::Angle => parse_angle(raw),
            _ => parse_real(raw),
        };
        match spec.key {
            "seed" => self.seed = parse_count(raw)?,
            "pump_power" => self.opa.pump_power = real()?,
            "threshold_power" => self.opa.threshold_power = real()?,
            "cavity_hwhm" => self.opa.cavity_hwhm = real()?,
            "analysis_frequency" => self.opa.analysis_frequency = real()?,
            "spectrum_max_frequency" => self.spectrum_max_frequency = real()?,
            "spectrum_points" => self.spectrum_points = parse_usize(raw)?,
            "detector_qe" => self.budget.detector_qe = real()?,
            "escape" => self.budget.escape = real()?,
            "propagation" => self.budget.propagation = real()?,
            "visibility" => self.budget.visibility = real()?,
            "alpha_h" => self.state.alpha_h = real()?,
            "alpha_v" => self.state.alpha_v = real()?,
            "theta" => self.state.theta = real()?,
            "allow_general_theta" => self.state.allow_general_theta = parse_bool(raw)?,
            "excess_noise_h" => self.state.excess_noise_h = real()?,
            "excess_noise_v" => self.state.excess_noise_v = real()?,
            "squeezing_db" => self.state.squeezing_db = real()?,
            "antisqueezing_db" => self.state.antisqueezing_db = real()?,
            "center_frequency" => self.analyzer.center_frequency = real()?,
            "rbw" => self.analyzer.rbw = real()?,
            "vbw" => self.analyzer.vbw = real()?,
            "span" => self.analyzer.span = real()?,
            "n_average" => self.analyzer.n_average = parse_usize(raw)?,
            "sweep_points" => self.analyzer.sweep_points = parse_usize(raw)?,
            "sweep_time" => self.analyzer.sweep_time = real()?,
            "electronic_noise_floor_db" => {
                self.analyzer.electronic_noise_floor_db = match raw {
                    "off" => None,
                    _ => Some(parse_real(raw).map_err(|e| format!("{e} (or `off`)"))?),
                }
            }
            "mode" => {
                self.trace.mode = match raw {
                    "scan" => TraceMode::Scan,
                    "locked" => TraceMode::Locked,
                    _ => return Err(format!("expected `scan` or `locked`, got `{raw}`")),
                }
            }
            "observable" => {
                self.trace.observable = Observable::ALL
                    .into_iter()
                    .find(|o| o.name() == raw)
                    .ok_or_else(|| format!("expected one of s0, s1, s2, s3, got `{raw}`"))?
            }
            "v_min_db" => self.trace.v_min_db = real()?,
            "v_max_db" => self.trace.v_max_db = real()?,
            "phase_rate" => self.trace.phase_rate = real()?,
            "samples" => self.mc_samples = parse_usize(raw)?,
            "shards" => self.mc_shards = parse_usize(raw)?,
            "amp" => self.fit.amplification = real()?,
            "deamp" => self.fit.deamplification = real()?,
            "ellipse_points" => self.ellipse_points = parse_usize(raw)?,
            other => unreachable!("key table and setter disagree on `{other}`"),
        }
        Ok(())
    }

    /// Re-checks every module invariant; errors name the offending key.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.opa.validate().map_err(model_to_validation)?;
        self.budget.validate().map_err(model_to_validation)?;
        self.analyzer.validate().map_err(model_to_validation)?;

        if !(self.spectrum_max_frequency >= 0.0) {
            return Err(invalid("spectrum_max_frequency", "must be >= 0 MHz"));
        }
        if self.spectrum_points < 2 {
            return Err(invalid("spectrum_points", "must be >= 2"));
        }
        let s = &self.state;
        if s.excess_noise_h < 0.0 {
            return Err(invalid("excess_noise_h", "must be >= 0"));
        }
        if s.excess_noise_v < 0.0 {
            return Err(invalid("excess_noise_v", "must be >= 0"));
        }
        if s.squeezing_db > s.antisqueezing_db {
            return Err(invalid("squeezing_db", "must not exceed antisqueezing_db"));
        }
        if LockPoint::classify(s.theta).is_none() && !s.allow_general_theta {
            return Err(invalid(
                "theta",
                &format!(
                    "{} rad is not a lock point (0 or pi/2); set allow_general_theta = true to use it",
                    s.theta
                ),
            ));
        }
        self.polarization_state().map_err(|e| match e {
            ConfigError::Validation { .. } => e,
            other => invalid("squeezing_db", &other.to_string()),
        })?;

        let t = &self.trace;
        if t.v_min_db > t.v_max_db {
            return Err(invalid("v_min_db", "must not exceed v_max_db"));
        }
        if self.mc_samples < MIN_MC_SAMPLES {
            return Err(invalid("samples", &format!("must be >= {MIN_MC_SAMPLES}")));
        }
        if self.mc_shards == 0 || self.mc_shards > self.mc_samples {
            return Err(invalid("shards", "must be in [1, samples]"));
        }
        for (key, v) in [("amp", self.fit.amplification), ("deamp", self.fit.deamplification)] {
            if !(v > 0.0) {
                return Err(invalid(key, "must be > 0"));
            }
        }
        if self.ellipse_points < 3 {
            return Err(invalid("ellipse_points", "must be >= 3"));
        }
        Ok(())
    }

    /// The detected-level targets for the squeezed mode, linear.
    pub fn detected_targets(&self) -> Result<QuadratureVariancePair, ConfigError> {
        QuadratureVariancePair::new(
            variance_from_db(self.state.squeezing_db),
            variance_from_db(self.state.antisqueezing_db),
        )
        .map_err(|e| invalid("squeezing_db", &e.to_string()))
    }

    /// Polarization state before the detectors.
    ///
    /// The squeezed mode's variances are back-solved through the detector
    /// efficiency so that the stations read `squeezing_db` and
    /// `antisqueezing_db`. Excess noise is added on top.
    pub fn polarization_state(&self) -> Result<PolarizationState, ConfigError> {
        let s = &self.state;
        let input = calibrate_input_variances(self.detected_targets()?, self.budget.detector_qe)
            .map_err(|e| invalid("squeezing_db", &e.to_string()))?;
        let h = GaussianMode::coherent(s.alpha_h, 0.0)
            .with_excess_noise(s.excess_noise_h)
            .map_err(|e| invalid("excess_noise_h", &e.to_string()))?;
        let v = GaussianMode::from_variances(input, s.alpha_v, 0.0)
            .and_then(|m| m.with_excess_noise(s.excess_noise_v))
            .map_err(|e| invalid("squeezing_db", &e.to_string()))?;
        build_polarization_state(h, v, s.theta)
            .map(|st| st.with_general_theta(s.allow_general_theta))
            .map_err(|e| invalid("theta", &e.to_string()))
    }

    /// Echo of every key, grouped by section, in file order.
    pub fn to_json(&self) -> Value {
        let mut root = Map::new();
        root.insert("seed".into(), json!(self.seed));
        for section in SECTIONS.iter().filter(|s| !s.is_empty()) {
            let mut obj = Map::new();
            for spec in KEYS.iter().filter(|k| k.section == *section) {
                obj.insert(spec.key.into(), self.value_of(spec.key));
            }
            root.insert((*section).into(), Value::Object(obj));
        }
        Value::Object(root)
    }

    fn value_of(&self, key: &str) -> Value {
        match key {
            "seed" => json!(self.seed),
            "pump_power" => json!(self.opa.pump_power),
            "threshold_power" => json!(self.opa.threshold_power),
            "cavity_hwhm" => json!(self.opa.cavity_hwhm),
            "analysis_frequency" => json!(self.opa.analysis_frequency),
            "spectrum_max_frequency" => json!(self.spectrum_max_frequency),
            "spectrum_points" => json!(self.spectrum_points),
            "detector_qe" => json!(self.budget.detector_qe),
            "escape" => json!(self.budget.escape),
            "propagation" => json!(self.budget.propagation),
            "visibility" => json!(self.budget.visibility),
            "alpha_h" => json!(self.state.alpha_h),
            "alpha_v" => json!(self.state.alpha_v),
            "theta" => json!(self.state.theta),
            "allow_general_theta" => json!(self.state.allow_general_theta),
            "excess_noise_h" => json!(self.state.excess_noise_h),
            "excess_noise_v" => json!(self.state.excess_noise_v),
            "squeezing_db" => json!(self.state.squeezing_db),
            "antisqueezing_db" => json!(self.state.antisqueezing_db),
            "center_frequency" => json!(self.analyzer.center_frequency),
            "rbw" => json!(self.analyzer.rbw),
            "vbw" => json!(self.analyzer.vbw),
            "span" => json!(self.analyzer.span),
            "n_average" => json!(self.analyzer.n_average),
            "sweep_points" => json!(self.analyzer.sweep_points),
            "sweep_time" => json!(self.analyzer.sweep_time),
            "electronic_noise_floor_db" => match self.analyzer.electronic_noise_floor_db {
                Some(v) => json!(v),
                None => json!("off"),
            },
            "mode" => json!(match self.trace.mode {
                TraceMode::Scan => "scan",
                TraceMode::Locked => "locked",
            }),
            "observable" => json!(self.trace.observable.name()),
            "v_min_db" => json!(self.trace.v_min_db),
            "v_max_db" => json!(self.trace.v_max_db),
            "phase_rate" => json!(self.trace.phase_rate),
            "samples" => json!(self.mc_samples),
            "shards" => json!(self.mc_shards),
            "amp" => json!(self.fit.amplification),
            "deamp" => json!(self.fit.deamplification),
            "ellipse_points" => json!(self.ellipse_points),
            other => unreachable!("no value for `{other}`"),
        }
    }
}

fn section_label(section: &str) -> String {
    if section.is_empty() {
        "the top level".into()
    } else {
        format!("[{section}]")
    }
}

fn invalid(key: &str, message: &str) -> ConfigError {
    ConfigError::Validation {
        key: key.into(),
        message: message.into(),
    }
}

fn model_to_validation(e: ModelError) -> ConfigError {
    let key = match &e {
        ModelError::Domain { name, .. } => (*name).to_string(),
        ModelError::AboveThreshold { .. } => "pump_power".into(),
        ModelError::UnsupportedPhase(_) => "theta".into(),
        ModelError::TooFewSamples { .. } => "samples".into(),
        ModelError::Unphysical(_) | ModelError::DarkState => "state".into(),
    };
    ConfigError::Validation {
        key,
        message: e.to_string(),
    }
}
