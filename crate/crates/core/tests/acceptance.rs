//! Acceptance suite. One line per criterion; the process fails if any is red.
//!
//! Run alone with `cargo test --test acceptance`.

use std::f64::consts::{FRAC_PI_2, PI};
use std::time::{Duration, Instant};

use polsqueeze::cli::{self, Config};
use polsqueeze::detection::{monte_carlo_stokes, zero_span_measurement, AnalyzerSettings};
use polsqueeze::gaussian::{apply_loss, beamsplit, phase_shift};
use polsqueeze::opa::{classical_gains, fit_pump_parameter};
use polsqueeze::stokes::{build_polarization_state, stokes_variances};
use polsqueeze::{db_from_variance, variance_from_db, GainPair, GaussianMode};
use proptest::prelude::*;
use proptest::test_runner::{Config as RunnerConfig, TestError, TestRng, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

/// Runs the CLI in-process; returns (exit code, stdout, elapsed).
fn cli(args: &[&str]) -> (i32, String, Duration) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let start = Instant::now();
    let code = cli::run(
        std::iter::once("polsqueeze").chain(args.iter().copied()),
        &mut out,
        &mut err,
    );
    let elapsed = start.elapsed();
    let mut text = String::from_utf8(out).unwrap();
    if code != 0 {
        text.push_str(&String::from_utf8_lossy(&err));
    }
    (code, text, elapsed)
}

fn cli_json(args: &[&str]) -> Result<(Value, Duration), String> {
    let (code, text, elapsed) = cli(args);
    if code != 0 {
        return Err(format!("`{}` exited {code}: {text}", args.join(" ")));
    }
    let v = serde_json::from_str(&text).map_err(|e| format!("invalid JSON from `{}`: {e}", args.join(" ")))?;
    Ok((v, elapsed))
}

fn out_f64(v: &Value, key: &str) -> Result<f64, String> {
    v["outputs"][key]
        .as_f64()
        .ok_or_else(|| format!("outputs.{key} missing"))
}

fn noise_budget() -> Outcome {
    let (v, elapsed) = cli_json(&["budget", "--json"])?;
    let eta = out_f64(&v, "eta_total")?;
    let sq = out_f64(&v, "v_plus_db")?;
    let omega = out_f64(&v, "omega_norm")?;
    check(
        (omega - 0.4).abs() < 1e-12,
        format!("omega_norm = {omega}, expected 0.4"),
    )?;
    check((eta - 0.9031).abs() <= 1e-4, format!("eta_total = {eta}"))?;
    check((sq + 5.6).abs() <= 0.2, format!("expected squeezing {sq:.3} dB"))?;
    check(elapsed < Duration::from_secs(1), format!("runtime {elapsed:?}"))?;
    Ok(format!("eta_total = {eta:.6}, squeezing = {sq:.3} dB, {elapsed:.1?}"))
}

fn stokes_levels(theta: &str) -> Result<([f64; 4], Duration), String> {
    let (v, elapsed) = cli_json(&["stokes", "--json", "--theta", theta])?;
    let mut db = [0.0; 4];
    for (i, d) in db.iter_mut().enumerate() {
        *d = out_f64(&v, &format!("v{i}_db"))?;
    }
    Ok((db, elapsed))
}

fn locked_stokes() -> Outcome {
    let cfg = Config::default();
    let target = cfg.detected_targets().map_err(|e| e.to_string())?;
    check(
        (target.v_plus - 0.4169).abs() < 5e-5,
        format!("detected v_plus target {}", target.v_plus),
    )?;
    check(
        (target.v_minus - 3.162).abs() < 5e-4,
        format!("detected v_minus target {}", target.v_minus),
    )?;
    check(
        cfg.state.excess_noise_h == 0.0 && cfg.state.excess_noise_v == 0.0,
        "excess noise enabled by default",
    )?;
    let (db, elapsed) = stokes_levels("0")?;
    check(
        db[0] == 0.0 && db[1] == 0.0,
        format!("V0 = {} dB, V1 = {} dB", db[0], db[1]),
    )?;
    check((db[2] + 3.8).abs() <= 0.1, format!("V2 = {} dB", db[2]))?;
    check(db[3] > 0.0 && (db[3] - 5.0).abs() <= 0.1, format!("V3 = {} dB", db[3]))?;
    check(elapsed < Duration::from_secs(1), format!("runtime {elapsed:?}"))?;
    Ok(format!(
        "V0 = {} dB, V1 = {} dB, V2 = {:.4} dB, V3 = {:.4} dB, {elapsed:.1?}",
        db[0], db[1], db[2], db[3]
    ))
}

fn theta_swap() -> Outcome {
    let (zero, _) = stokes_levels("0")?;
    let (half, _) = stokes_levels("pi/2")?;
    check(
        zero[2].to_bits() == half[3].to_bits() && zero[3].to_bits() == half[2].to_bits(),
        format!("theta=0 {zero:?} vs theta=pi/2 {half:?}"),
    )?;
    check(zero[0] == half[0] && zero[1] == half[1], "V0/V1 changed with theta")?;

    // and on the absolute variances of the library path
    let state = Config::default().polarization_state().map_err(|e| e.to_string())?;
    let a = stokes_variances(&state).map_err(|e| e.to_string())?;
    let b = stokes_variances(&state.with_theta(FRAC_PI_2).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    check(
        a.variances[2].to_bits() == b.variances[3].to_bits() && a.variances[3].to_bits() == b.variances[2].to_bits(),
        "absolute variances not swapped bitwise",
    )?;
    Ok(format!(
        "V2/V3 at theta=0 ({:.4}, {:.4}) dB swap bitwise at pi/2",
        zero[2], zero[3]
    ))
}

fn gain_fit() -> Outcome {
    let (v, _) = cli_json(&["fit", "--json", "--amp", "3.2", "--deamp", "0.47"])?;
    let x = out_f64(&v, "x")?;
    let residual = out_f64(&v, "residual")?;
    check((0.441..=0.459).contains(&x), format!("x* = {x}"))?;
    check(
        residual.is_finite() && residual >= 0.0,
        format!("residual = {residual}"),
    )?;
    let model = classical_gains(x).map_err(|e| e.to_string())?;
    let reported = GainPair {
        amplification: out_f64(&v, "model_amplification")?,
        deamplification: out_f64(&v, "model_deamplification")?,
    };
    check(
        model == reported,
        format!("model gains {reported:?} != classical_gains(x*) {model:?}"),
    )?;
    let expect_res = (model.amplification - 3.2).powi(2) + (model.deamplification - 0.47).powi(2);
    check(
        (residual - expect_res).abs() <= 1e-12,
        format!("residual {residual} vs {expect_res}"),
    )?;

    let mut worst = 0.0f64;
    for k in 1..=7 {
        let x_true = k as f64 / 10.0;
        let gains = classical_gains(x_true).map_err(|e| e.to_string())?;
        let fit = fit_pump_parameter(&gains).map_err(|e| e.to_string())?;
        worst = worst.max((fit.x - x_true).abs());
    }
    check(worst <= 1e-4, format!("synthetic recovery error {worst:e}"))?;
    Ok(format!(
        "x* = {x:.7}, residual = {residual:.3e}; synthetic recovery max error {worst:.1e}"
    ))
}

fn monte_carlo() -> Outcome {
    let start = Instant::now();
    let cfg = Config::default();
    let qe = cfg.budget.detector_qe;
    let state = cfg.polarization_state().map_err(|e| e.to_string())?;
    let detected = state.map_modes(|m| apply_loss(m, qe)).map_err(|e| e.to_string())?;
    let analytic = stokes_variances(&detected).map_err(|e| e.to_string())?;
    let mc = monte_carlo_stokes(&detected, 1_000_000, cfg.seed).map_err(|e| e.to_string())?;
    let z = mc.z_scores(&analytic.normalized);
    let mut worst = z.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    check(worst <= 5.0, format!("criterion-2 state z-scores {z:?}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(20);
    for i in 0..20 {
        let alpha_h = rng.random_range(0.0..20.0);
        let alpha_v = rng.random_range(0.0..20.0);
        let r = rng.random_range(0.0..1.0);
        let theta = if rng.random_bool(0.5) { 0.0 } else { FRAC_PI_2 };
        let state = build_polarization_state(
            GaussianMode::coherent(alpha_h, 0.0),
            GaussianMode::squeezed(r, 0.0, alpha_v, 0.0).map_err(|e| e.to_string())?,
            theta,
        )
        .map_err(|e| e.to_string())?;
        let analytic = stokes_variances(&state).map_err(|e| e.to_string())?;
        let mc = monte_carlo_stokes(&state, 200_000, i).map_err(|e| e.to_string())?;
        let z = mc.z_scores(&analytic.normalized);
        let w = z.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        check(
            w <= 5.0,
            format!("random state {i} (alpha_h {alpha_h}, alpha_v {alpha_v}, r {r}, theta {theta}): z = {z:?}"),
        )?;
        worst = worst.max(w);
    }
    let elapsed = start.elapsed();
    check(elapsed < Duration::from_secs(60), format!("runtime {elapsed:?}"))?;
    Ok(format!(
        "V2/qnl sampled {:.4} vs {:.4}; max |z| over 21 states = {worst:.2}, {elapsed:.1?}",
        mc.normalized[2], analytic.normalized[2]
    ))
}

fn parse_trace_csv(text: &str) -> Result<(Vec<f64>, Vec<f64>), String> {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    check(lines.next() == Some("phase_rad,noise_db"), "missing header")?;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for l in lines {
        let (x, y) = l.split_once(',').ok_or("malformed row")?;
        xs.push(x.parse::<f64>().map_err(|e| e.to_string())?);
        ys.push(y.parse::<f64>().map_err(|e| e.to_string())?);
    }
    Ok((xs, ys))
}

fn percentile(sorted: &[f64], p: f64) -> f64 {
    sorted[((sorted.len() - 1) as f64 * p).round() as usize]
}

fn trace_synthesis() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        let (code, text, _) = cli(&["trace", "--out", p.to_str().unwrap()]);
        check(code == 0, text)?;
    }
    let ta = std::fs::read(&a).map_err(|e| e.to_string())?;
    let tb = std::fs::read(&b).map_err(|e| e.to_string())?;
    check(ta == tb, "reruns differ")?;
    let (xs, mut ys) = parse_trace_csv(std::str::from_utf8(&ta).unwrap())?;
    let periods = (xs[xs.len() - 1] - xs[0]) / PI;
    check(periods >= 3.0, format!("only {periods:.2} phase periods"))?;
    ys.sort_by(f64::total_cmp);
    let lo = percentile(&ys, 0.01);
    let hi = percentile(&ys, 0.99);
    check((lo + 4.1).abs() <= 0.3, format!("1st percentile {lo}"))?;
    check((hi - 5.3).abs() <= 0.3, format!("99th percentile {hi}"))?;
    Ok(format!(
        "{} points over {periods:.1} periods; p01 = {lo:.3} dB, p99 = {hi:.3} dB; reruns byte-identical",
        ys.len()
    ))
}

const CASES: u32 = 500;

fn runner() -> TestRunner {
    let config = RunnerConfig {
        cases: CASES,
        failure_persistence: None,
        ..RunnerConfig::default()
    };
    TestRunner::new_with_rng(config.clone(), TestRng::deterministic_rng(config.rng_algorithm))
}

fn mode() -> impl Strategy<Value = GaussianMode> {
    (0.0..2.0f64, 0.0..PI, -20.0..20.0f64, -20.0..20.0f64, 0.0..3.0f64).prop_map(|(r, angle, ax, ap, excess)| {
        GaussianMode::squeezed(r, angle, ax, ap)
            .unwrap()
            .with_excess_noise(excess)
            .unwrap()
    })
}

fn eta() -> impl Strategy<Value = f64> {
    (1e-6..=1.0f64).prop_map(|e| e.min(1.0))
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}

fn failure<T: std::fmt::Debug>(res: Result<(), TestError<T>>) -> Option<String> {
    res.err().map(|e| e.to_string())
}

fn property_suites() -> Outcome {
    let mut failures = Vec::new();
    let mut record = |name: &str, res: Option<String>| {
        if let Some(e) = res {
            failures.push(format!("{name}: {e}"));
        }
    };

    record(
        "loss composition",
        failure(runner().run(&(mode(), eta(), eta()), |(m, a, b)| {
            let two = apply_loss(&apply_loss(&m, a).unwrap(), b).unwrap();
            let one = apply_loss(&m, a * b).unwrap();
            for (x, y) in two.cov().iter().zip(one.cov().iter()) {
                prop_assert!(close(*x, *y, 1e-12), "{} vs {}", x, y);
            }
            for (x, y) in two.mean().iter().zip(one.mean().iter()) {
                prop_assert!(close(*x, *y, 1e-12));
            }
            Ok(())
        })),
    );

    record(
        "vacuum fixed point",
        failure(runner().run(&(eta(), -10.0..10.0f64), |(e, phi)| {
            let v = GaussianMode::vacuum();
            prop_assert_eq!(apply_loss(&v, e).unwrap(), v);
            prop_assert_eq!(phase_shift(&v, phi).cov(), v.cov());
            Ok(())
        })),
    );

    record(
        "det >= 1 preservation",
        failure(runner().run(
            &(mode(), mode(), eta(), 0.0..=1.0f64, -10.0..10.0f64),
            |(m, n, e, t, phi)| {
                let tol = 1e-9;
                prop_assert!(apply_loss(&m, e).unwrap().det() >= 1.0 - tol);
                prop_assert!(phase_shift(&m, phi).det() >= 1.0 - tol);
                let (c, d) = beamsplit(&m, &n, t).unwrap();
                prop_assert!(c.det() >= 1.0 - tol && d.det() >= 1.0 - tol);
                Ok(())
            },
        )),
    );

    record(
        "phase eigenvalue invariance",
        failure(runner().run(&(mode(), -20.0..20.0f64), |(m, phi)| {
            let before = m.cov_eigenvalues();
            let after = phase_shift(&m, phi).cov_eigenvalues();
            prop_assert!(close(before[0], after[0], 1e-12) && close(before[1], after[1], 1e-12));
            prop_assert!(close(m.intensity(), phase_shift(&m, phi).intensity(), 1e-12));
            Ok(())
        })),
    );

    record(
        "coherent QNL normalization",
        failure(runner().run(
            &(0.0..50.0f64, 0.0..50.0f64, -PI..PI, any::<bool>()),
            |(ah, av, pv, half)| {
                prop_assume!(ah * ah + av * av > 1e-6);
                let theta = if half { FRAC_PI_2 } else { 0.0 };
                let state = build_polarization_state(
                    GaussianMode::coherent(ah, 0.0),
                    GaussianMode::coherent(av * pv.cos(), av * pv.sin()),
                    theta,
                )
                .unwrap();
                let m = stokes_variances(&state).unwrap();
                for v in m.normalized {
                    prop_assert!((v - 1.0).abs() <= 1e-12, "{}", v);
                }
                Ok(())
            },
        )),
    );

    record(
        "dB round trip",
        failure(runner().run(&(-80.0..80.0f64), |db| {
            let back = db_from_variance(variance_from_db(db)).unwrap();
            prop_assert!((back - db).abs() <= 1e-12, "{} -> {}", db, back);
            Ok(())
        })),
    );

    record(
        "V0 = V1 identity",
        failure(runner().run(&(mode(), mode(), any::<bool>()), |(h, v, half)| {
            prop_assume!(h.intensity() + v.intensity() > 1e-6);
            let theta = if half { FRAC_PI_2 } else { 0.0 };
            let state = build_polarization_state(h, v, theta).unwrap();
            let m = stokes_variances(&state).unwrap();
            prop_assert_eq!(m.variances[0].to_bits(), m.variances[1].to_bits());
            Ok(())
        })),
    );

    if failures.is_empty() {
        Ok(format!("7 properties x {CASES} cases, zero failures"))
    } else {
        Err(failures.join("; "))
    }
}

fn analyzer_calibration() -> Outcome {
    let settings = AnalyzerSettings::default();
    check(settings.n_average == 20, "default n_average is not 20")?;
    let mut all = Vec::new();
    for seed in 0..10 {
        let r = zero_span_measurement(variance_from_db(-3.8), &settings, seed).map_err(|e| e.to_string())?;
        check(
            (0.02..=0.08).contains(&r.stderr_db),
            format!("seed {seed}: stderr {} dB", r.stderr_db),
        )?;
        all.push(r.stderr_db);
    }
    let lo = all.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = all.iter().cloned().fold(0.0, f64::max);
    Ok(format!("stderr over 10 seeds in [{lo:.4}, {hi:.4}] dB"))
}

fn main() {
    // ignore libtest flags such as --nocapture
    let criteria: [Criterion; 8] = [
        ("noise-budget reproduction", noise_budget),
        ("locked Stokes reproduction", locked_stokes),
        ("theta swap", theta_swap),
        ("gain fitting", gain_fit),
        ("Monte Carlo oracle", monte_carlo),
        ("trace synthesis", trace_synthesis),
        ("property suites", property_suites),
        ("statistical model calibration", analyzer_calibration),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("criterion {} {name}: PASS ({detail})", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {} {name}: FAIL ({why})", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} of {} criteria pass",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
