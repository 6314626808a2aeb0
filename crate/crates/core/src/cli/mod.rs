//! Command-line frontend.
//!
//! ```text
//! polsqueeze <command> [--config PATH] [--json] [--seed N] [--out PATH] [--<key> VALUE ...]
//! ```
//!
//! Every configuration key is also a flag of the same name; flags are applied
//! after the config file. Exit codes: 0 success, 1 domain/validation/I-O
//! error, 2 usage error.

pub mod config;
pub mod output;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Arg, ArgAction, ArgMatches, Command};
use serde_json::json;
use thiserror::Error;

use crate::detection::{
    monte_carlo_stokes_sharded, scanned_trace, station_reading, zero_span_measurement, zero_span_trace, NoiseTrace,
    Observable, StationKind, StationSetting,
};
use crate::error::Error as ModelError;
use crate::gaussian::apply_loss;
use crate::opa::{classical_gains, detected_variances, fit_pump_parameter, squeezing_spectrum};
use crate::stokes::{noise_ellipsoid, stokes_variances, PolarizationState};
pub use config::{Config, ConfigError, TraceMode};
use output::{emit_report_json, emit_trace_csv, fmt_db, fmt_sig, Report};

/// `|z|` above which the Monte Carlo comparison is reported as a disagreement.
pub const MC_AGREEMENT_SIGMAS: f64 = 5.0;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Model(#[from] ModelError),
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        1
    }
}

const COMMANDS: [(&str, &str); 7] = [
    (
        "budget",
        "efficiency chain and expected squeezing at the analysis frequency",
    ),
    ("opa", "classical gains and squeezing spectrum versus frequency"),
    ("stokes", "four-parameter Stokes noise report at the locked phase"),
    ("trace", "synthetic spectrum-analyzer noise trace as CSV"),
    (
        "montecarlo",
        "Monte Carlo sampling check of the analytic Stokes variances",
    ),
    ("fit", "pump parameter from measured classical gains"),
    ("ellipsoid", "Stokes noise ellipsoid and its plane projections"),
];

fn command() -> Command {
    let mut cmd = Command::new("polsqueeze")
        .about("Polarization-squeezed light: OPA noise budget, Stokes variances and detection simulation")
        .subcommand_required(true)
        .arg_required_else_help(true)
        .arg(
            Arg::new("config")
                .long("config")
                .value_name("PATH")
                .global(true)
                .help("configuration file (key = value with [section] headers)"),
        )
        .arg(
            Arg::new("json")
                .long("json")
                .action(ArgAction::SetTrue)
                .global(true)
                .help("print one JSON object instead of text"),
        )
        .arg(
            Arg::new("out")
                .long("out")
                .value_name("PATH")
                .global(true)
                .help("write CSV data to PATH"),
        );
    for (key, section, help) in config::keys() {
        let help = if section.is_empty() {
            help.to_string()
        } else {
            format!("{help} [{section}]")
        };
        cmd = cmd.arg(
            Arg::new(key)
                .long(key)
                .value_name("VALUE")
                .global(true)
                .allow_negative_numbers(true)
                .help(help)
                .help_heading("Config overrides"),
        );
    }
    for (name, about) in COMMANDS {
        cmd = cmd.subcommand(Command::new(name).about(about));
    }
    cmd
}

/// Runs the tool with `argv` (including the program name) and returns the
/// process exit code.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let matches = match command().try_get_matches_from(argv) {
        Ok(m) => m,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{text}");
                    0
                }
                _ => {
                    let _ = write!(stderr, "{text}");
                    2
                }
            };
        }
    };
    let (name, sub) = matches.subcommand().expect("subcommand is required");
    match execute(name, sub, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

/// Builds the effective configuration: defaults, then the file, then flags.
pub fn resolve_config(matches: &ArgMatches) -> Result<Config, ConfigError> {
    let mut cfg = Config::default();
    if let Some(path) = matches.get_one::<String>("config") {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.clone(),
            source,
        })?;
        cfg.apply_text(&text)?;
    }
    for (key, _, _) in config::keys() {
        if let Some(value) = matches.get_one::<String>(key) {
            cfg.set(key, value)?;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

struct Options {
    json: bool,
    out: Option<PathBuf>,
}

fn execute(name: &str, matches: &ArgMatches, stdout: &mut dyn Write) -> Result<(), CliError> {
    let cfg = resolve_config(matches)?;
    let opts = Options {
        json: matches.get_flag("json"),
        out: matches.get_one::<String>("out").map(PathBuf::from),
    };
    let report = match name {
        "budget" => budget(&cfg)?,
        "opa" => opa(&cfg, &opts)?,
        "stokes" => stokes(&cfg)?,
        "trace" => return trace(&cfg, &opts, stdout),
        "montecarlo" => montecarlo(&cfg)?,
        "fit" => fit(&cfg)?,
        "ellipsoid" => return ellipsoid(&cfg, &opts, stdout),
        other => unreachable!("unregistered command {other}"),
    };
    emit(&report, &opts, stdout)
}

fn emit(report: &Report, opts: &Options, stdout: &mut dyn Write) -> Result<(), CliError> {
    let res = if opts.json {
        emit_report_json(report, stdout)
    } else {
        report.emit_human(stdout)
    };
    res.map_err(|source| CliError::Io {
        path: "<stdout>".into(),
        source,
    })
}

fn write_file<F>(path: &Path, f: F) -> Result<(), CliError>
where
    F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
{
    let io_err = |source| CliError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut w = BufWriter::new(File::create(path).map_err(io_err)?);
    f(&mut w).map_err(io_err)?;
    w.flush().map_err(io_err)
}

fn budget(cfg: &Config) -> Result<Report, CliError> {
    let mut r = Report::new("budget", cfg.to_json(), cfg.seed);
    let b = &cfg.budget;
    r.heading("efficiency budget");
    r.value("detector_qe", "detector quantum efficiency", b.detector_qe);
    r.value("escape", "escape efficiency", b.escape);
    r.value("propagation", "propagation efficiency", b.propagation);
    r.value("visibility", "visibility (enters squared)", b.visibility);
    r.value("eta_total", "total efficiency", b.total());

    let x = cfg.opa.pump_parameter()?;
    let gains = classical_gains(x)?;
    r.heading(&format!(
        "OPA at {} mW pump, {} MHz analysis frequency",
        fmt_sig(cfg.opa.pump_power),
        fmt_sig(cfg.opa.analysis_frequency)
    ));
    r.value("pump_parameter", "pump parameter x", x);
    r.value("omega_norm", "sideband frequency / HWHM", cfg.opa.omega_norm());
    r.value("amplification", "classical amplification", gains.amplification);
    r.value("deamplification", "classical de-amplification", gains.deamplification);

    let detected = detected_variances(&cfg.opa, &cfg.budget)?;
    r.heading("expected detected noise");
    r.level("v_plus", "squeezing", detected.v_plus);
    r.level("v_minus", "anti-squeezing", detected.v_minus);
    Ok(r)
}

fn opa(cfg: &Config, opts: &Options) -> Result<Report, CliError> {
    let mut r = Report::new("opa", cfg.to_json(), cfg.seed);
    let x = cfg.opa.pump_parameter()?;
    let gains = classical_gains(x)?;
    r.heading(&format!("OPA at {} mW pump", fmt_sig(cfg.opa.pump_power)));
    r.value("pump_parameter", "pump parameter x", x);
    r.value("amplification", "classical amplification", gains.amplification);
    r.value("deamplification", "classical de-amplification", gains.deamplification);

    let n = cfg.spectrum_points;
    let eta = cfg.budget.total();
    let mut rows = Vec::with_capacity(n);
    r.heading("  frequency_mhz  opa_v_plus_db  opa_v_minus_db  det_v_plus_db  det_v_minus_db");
    for i in 0..n {
        let f = cfg.spectrum_max_frequency * i as f64 / (n - 1) as f64;
        let w = f / cfg.opa.cavity_hwhm;
        let at_output = squeezing_spectrum(x, w, cfg.budget.escape)?;
        let ideal = squeezing_spectrum(x, w, 1.0)?;
        let det = crate::gaussian::GaussianMode::from_variances(ideal, 0.0, 0.0)
            .and_then(|m| apply_loss(&m, eta))?
            .variances();
        r.line(format!(
            "  {:>13}  {:>13.2}  {:>14.2}  {:>13.2}  {:>14.2}",
            fmt_sig(f),
            at_output.plus_db(),
            at_output.minus_db(),
            det.plus_db(),
            det.minus_db()
        ));
        rows.push([
            f,
            w,
            at_output.plus_db(),
            at_output.minus_db(),
            det.plus_db(),
            det.minus_db(),
        ]);
    }
    r.insert(
        "spectrum",
        json!(rows
            .iter()
            .map(|row| json!({
                "frequency_mhz": row[0],
                "omega_norm": row[1],
                "opa_v_plus_db": row[2],
                "opa_v_minus_db": row[3],
                "detected_v_plus_db": row[4],
                "detected_v_minus_db": row[5],
            }))
            .collect::<Vec<_>>()),
    );
    if let Some(path) = &opts.out {
        write_file(path, |w| {
            writeln!(
                w,
                "frequency_mhz,omega_norm,opa_v_plus_db,opa_v_minus_db,detected_v_plus_db,detected_v_minus_db"
            )?;
            for row in &rows {
                let cells: Vec<String> = row.iter().map(|v| fmt_sig(*v)).collect();
                writeln!(w, "{}", cells.join(","))?;
            }
            Ok(())
        })?;
        r.line(format!("spectrum written to {}", path.display()));
    }
    Ok(r)
}

/// Station readout for every Stokes parameter, in S0..S3 order.
fn read_all_stations(
    state: &PolarizationState,
    detector_qe: f64,
) -> Result<Vec<crate::detection::ObservableReading>, ModelError> {
    let mut readings = Vec::with_capacity(4);
    for kind in [
        StationKind::SumDiff,
        StationKind::HalfWave,
        StationKind::HalfPlusQuarterWave,
    ] {
        readings.extend(station_reading(state, &StationSetting { kind, detector_qe })?);
    }
    Ok(readings)
}

/// Independent seed per observable, derived from the run seed.
fn observable_seed(seed: u64, o: Observable) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ (o.index() as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn stokes(cfg: &Config) -> Result<Report, CliError> {
    let state = cfg.polarization_state()?;
    let readings = read_all_stations(&state, cfg.budget.detector_qe)?;
    let mut r = Report::new("stokes", cfg.to_json(), cfg.seed);
    r.heading(&format!(
        "Stokes noise relative to QNL (theta = {} rad, detector QE = {})",
        fmt_sig(cfg.state.theta),
        fmt_sig(cfg.budget.detector_qe)
    ));
    for rd in &readings {
        let name = rd.observable.name();
        r.level(
            &format!("v{}", rd.observable.index()),
            &format!("{} analytic", name.to_uppercase()),
            rd.normalized,
        );
    }
    r.heading(&format!(
        "zero-span measurement at {} MHz, RBW {} kHz, VBW {} Hz, {} averages (seed {})",
        fmt_sig(cfg.analyzer.center_frequency),
        fmt_sig(cfg.analyzer.rbw),
        fmt_sig(cfg.analyzer.vbw),
        cfg.analyzer.n_average,
        cfg.seed
    ));
    for rd in &readings {
        let m = zero_span_measurement(rd.normalized, &cfg.analyzer, observable_seed(cfg.seed, rd.observable))?;
        let i = rd.observable.index();
        r.insert(&format!("measured_v{i}_db"), json!(m.mean_db));
        r.insert(&format!("measured_v{i}_stderr_db"), json!(m.stderr_db));
        r.line(format!(
            "  {:<30}{} +/- {:.2}",
            format!("{} measured", rd.observable.name().to_uppercase()),
            fmt_db(m.mean_db),
            m.stderr_db
        ));
    }
    let means: Vec<f64> = readings.iter().map(|rd| rd.mean).collect();
    r.insert("means", json!(means));
    r.insert("qnl", json!(readings[0].mean));
    Ok(r)
}

fn trace(cfg: &Config, opts: &Options, stdout: &mut dyn Write) -> Result<(), CliError> {
    let (trace, meta): (NoiseTrace, Vec<(&str, String)>) = match cfg.trace.mode {
        TraceMode::Scan => {
            let t = scanned_trace(
                cfg.trace.v_min_db,
                cfg.trace.v_max_db,
                &cfg.analyzer,
                cfg.trace.phase_rate,
                cfg.seed,
            )?;
            let meta = vec![
                ("v_min_db", fmt_sig(cfg.trace.v_min_db)),
                ("v_max_db", fmt_sig(cfg.trace.v_max_db)),
                ("phase_rate_rad_per_s", fmt_sig(cfg.trace.phase_rate)),
            ];
            (t, meta)
        }
        TraceMode::Locked => {
            let state = cfg.polarization_state()?;
            let o = cfg.trace.observable;
            let level = read_all_stations(&state, cfg.budget.detector_qe)?[o.index()].normalized;
            let t = zero_span_trace(level, &cfg.analyzer, cfg.seed)?;
            (
                t,
                vec![
                    ("observable", o.name().to_string()),
                    ("level_db", fmt_sig(10.0 * level.log10())),
                ],
            )
        }
    };

    let mut sorted = trace.y_db.clone();
    sorted.sort_by(f64::total_cmp);
    let pct = |p: f64| sorted[((sorted.len() - 1) as f64 * p).round() as usize];
    let mut r = Report::new("trace", cfg.to_json(), cfg.seed);
    r.heading(&format!("noise trace, {} points, seed {}", trace.y_db.len(), cfg.seed));
    r.value("min_db", "minimum, dB", sorted[0]);
    r.value("p01_db", "1st percentile, dB", pct(0.01));
    r.value("p99_db", "99th percentile, dB", pct(0.99));
    r.value("max_db", "maximum, dB", sorted[sorted.len() - 1]);

    if let Some(path) = &opts.out {
        write_file(path, |w| emit_trace_csv(&trace, &meta, w))?;
        r.line(format!("trace written to {}", path.display()));
        return emit(&r, opts, stdout);
    }
    if opts.json {
        r.insert("x", json!(trace.x_values));
        r.insert("y_db", json!(trace.y_db));
        return emit(&r, opts, stdout);
    }
    emit_trace_csv(&trace, &meta, stdout).map_err(|source| CliError::Io {
        path: "<stdout>".into(),
        source,
    })
}

fn montecarlo(cfg: &Config) -> Result<Report, CliError> {
    let state = cfg.polarization_state()?;
    let detected = state.map_modes(|m| apply_loss(m, cfg.budget.detector_qe))?;
    let analytic = stokes_variances(&detected)?;
    let mc = monte_carlo_stokes_sharded(&detected, cfg.mc_samples, cfg.seed, cfg.mc_shards)?;
    let z = mc.z_scores(&analytic.normalized);

    let mut r = Report::new("montecarlo", cfg.to_json(), cfg.seed);
    r.heading(&format!(
        "Monte Carlo check: {} samples, {} shard(s), seed {}",
        cfg.mc_samples, cfg.mc_shards, cfg.seed
    ));
    r.heading("  param   analytic    sampled     stderr      z");
    let mut rows = Vec::new();
    for o in Observable::ALL {
        let i = o.index();
        r.line(format!(
            "  {:<6}  {:<10}  {:<10}  {:<10}  {:+.2}",
            o.name(),
            fmt_sig(analytic.normalized[i]),
            fmt_sig(mc.normalized[i]),
            fmt_sig(mc.normalized_stderr[i]),
            z[i]
        ));
        rows.push(json!({
            "observable": o.name(),
            "analytic": analytic.normalized[i],
            "sampled": mc.normalized[i],
            "stderr": mc.normalized_stderr[i],
            "z": z[i],
        }));
    }
    let agree = z.iter().all(|v| v.abs() <= MC_AGREEMENT_SIGMAS);
    r.insert("comparison", json!(rows));
    r.insert("agree", json!(agree));
    r.line(format!(
        "  {} within {MC_AGREEMENT_SIGMAS} standard errors",
        if agree { "all parameters" } else { "NOT all parameters" }
    ));
    Ok(r)
}

fn fit(cfg: &Config) -> Result<Report, CliError> {
    let result = fit_pump_parameter(&cfg.fit)?;
    let mut r = Report::new("fit", cfg.to_json(), cfg.seed);
    r.heading(&format!(
        "least-squares pump parameter for amplification {} and de-amplification {}",
        fmt_sig(cfg.fit.amplification),
        fmt_sig(cfg.fit.deamplification)
    ));
    r.value("x", "fitted pump parameter x", result.x);
    r.value("model_amplification", "model amplification", result.model.amplification);
    r.value(
        "model_deamplification",
        "model de-amplification",
        result.model.deamplification,
    );
    r.value("residual", "sum of squared residuals", result.residual);
    if cfg.fit.amplification >= 1.0 {
        r.value(
            "x_from_amplification",
            "x from amplification alone",
            1.0 - 1.0 / cfg.fit.amplification.sqrt(),
        );
    }
    if cfg.fit.deamplification <= 1.0 {
        r.value(
            "x_from_deamplification",
            "x from de-amplification alone",
            1.0 / cfg.fit.deamplification.sqrt() - 1.0,
        );
    }
    r.value(
        "threshold_power",
        "implied threshold, mW",
        cfg.opa.pump_power / (result.x * result.x),
    );
    Ok(r)
}

fn ellipsoid(cfg: &Config, opts: &Options, stdout: &mut dyn Write) -> Result<(), CliError> {
    let state = cfg.polarization_state()?;
    let detected = state.map_modes(|m| apply_loss(m, cfg.budget.detector_qe))?;
    let e = noise_ellipsoid(&detected)?;

    let mut r = Report::new("ellipsoid", cfg.to_json(), cfg.seed);
    r.heading("Stokes noise ellipsoid (QNL-normalized standard deviations)");
    r.value("axis_s1", "S1 semi-axis", e.semi_axes[0]);
    r.value("axis_s2", "S2 semi-axis", e.semi_axes[1]);
    r.value("axis_s3", "S3 semi-axis", e.semi_axes[2]);
    r.insert("center", json!(e.center));
    r.insert("principal_axes", json!(e.principal_axes));
    let orientation: Vec<[f64; 3]> = (0..3)
        .map(|c| [e.orientation[(0, c)], e.orientation[(1, c)], e.orientation[(2, c)]])
        .collect();
    r.insert("orientation", json!(orientation));
    let plane_name = |p: (usize, usize)| format!("s{}-s{}", p.0, p.1);
    r.insert(
        "projections",
        json!(e
            .projections
            .iter()
            .map(|p| json!({
                "plane": plane_name(p.plane),
                "semi_major": p.semi_major,
                "semi_minor": p.semi_minor,
                "angle": p.angle,
            }))
            .collect::<Vec<_>>()),
    );

    let n = cfg.ellipse_points;
    let write_points = |w: &mut dyn Write| -> std::io::Result<()> {
        writeln!(w, "plane,curve,u,v")?;
        for p in &e.projections {
            let name = plane_name(p.plane);
            for [u, v] in p.points(n) {
                writeln!(w, "{name},state,{},{}", fmt_sig(u), fmt_sig(v))?;
            }
            for k in 0..n {
                let t = std::f64::consts::TAU * k as f64 / n as f64;
                writeln!(w, "{name},coherent,{},{}", fmt_sig(t.cos()), fmt_sig(t.sin()))?;
            }
        }
        Ok(())
    };

    if let Some(path) = &opts.out {
        write_file(path, |w| write_points(w))?;
        r.line(format!("projection ellipses written to {}", path.display()));
        return emit(&r, opts, stdout);
    }
    if opts.json {
        return emit(&r, opts, stdout);
    }
    write_points(stdout).map_err(|source| CliError::Io {
        path: "<stdout>".into(),
        source,
    })
}
