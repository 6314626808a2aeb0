use std::f64::consts::{FRAC_PI_2, PI};

use approx::assert_abs_diff_eq;
use polsqueeze::detection::{scanned_trace, zero_span_measurement, AnalyzerSettings};
use polsqueeze::gaussian::{apply_loss, beamsplit};
use polsqueeze::opa::{classical_gains, detected_variances, fit_pump_parameter, squeezing_spectrum, FIT_X_MAX};
use polsqueeze::stokes::{build_polarization_state, stokes_means, stokes_variances};
use polsqueeze::{EfficiencyBudget, GainPair, GaussianMode, OpaConfig, QuadratureVariancePair};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn mode() -> impl Strategy<Value = GaussianMode> {
    (0.0..2.0f64, 0.0..PI, -20.0..20.0f64, -20.0..20.0f64, 0.0..3.0f64).prop_map(|(r, angle, ax, ap, excess)| {
        GaussianMode::squeezed(r, angle, ax, ap)
            .unwrap()
            .with_excess_noise(excess)
            .unwrap()
    })
}

fn trace(m: &GaussianMode) -> f64 {
    m.cov()[(0, 0)] + m.cov()[(1, 1)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn beamsplit_conserves_total_noise(a in mode(), b in mode(), t in 0.0..=1.0f64) {
        let (c, d) = beamsplit(&a, &b, t).unwrap();
        let (e, f) = beamsplit(&d, &c, 1.0 - t).unwrap();
        let total = trace(&a) + trace(&b);
        prop_assert!((trace(&c) + trace(&d) - total).abs() <= 1e-9 * total);
        prop_assert!((trace(&e) + trace(&f) - total).abs() <= 1e-9 * total);
        prop_assert!((c.intensity() + d.intensity() - a.intensity() - b.intensity()).abs() <= 1e-9 * (1.0 + a.intensity() + b.intensity()));
    }

    #[test]
    fn loss_is_beamsplitter_with_vacuum(m in mode(), eta in 0.0..=1.0f64) {
        prop_assume!(eta > 0.0);
        let lossy = apply_loss(&m, eta).unwrap();
        let (c, _) = beamsplit(&m, &GaussianMode::vacuum(), eta).unwrap();
        for (x, y) in lossy.cov().iter().zip(c.cov().iter()) {
            prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
        }
    }

    #[test]
    fn theta_swap_is_exact(h in mode(), v in mode()) {
        prop_assume!(h.intensity() + v.intensity() > 1e-6);
        let zero = stokes_variances(&build_polarization_state(h, v, 0.0).unwrap()).unwrap();
        let half = stokes_variances(&build_polarization_state(h, v, FRAC_PI_2).unwrap()).unwrap();
        prop_assert_eq!(zero.variances[2].to_bits(), half.variances[3].to_bits());
        prop_assert_eq!(zero.variances[3].to_bits(), half.variances[2].to_bits());
        prop_assert_eq!(zero.variances[0].to_bits(), half.variances[0].to_bits());
    }

    #[test]
    fn stokes_mean_vector_on_the_cone(ah in -20.0..20.0f64, aph in -20.0..20.0f64, av in -20.0..20.0f64, apv in -20.0..20.0f64, half: bool) {
        let theta = if half { FRAC_PI_2 } else { 0.0 };
        let state = build_polarization_state(GaussianMode::coherent(ah, aph), GaussianMode::coherent(av, apv), theta).unwrap();
        let s = stokes_means(&state);
        let len2 = s[1] * s[1] + s[2] * s[2] + s[3] * s[3];
        prop_assert!((s[0] * s[0] - len2).abs() <= 1e-9 * s[0].powi(2).max(1.0));
    }

    #[test]
    fn detection_never_purifies(
        x in 0.0..0.95f64,
        omega in 0.0..3.0f64,
        qe in 0.05..=1.0f64,
        escape in 0.05..=1.0f64,
        prop in 0.05..=1.0f64,
        vis in 0.05..=1.0f64,
    ) {
        let threshold = 100.0;
        let cfg = OpaConfig::new(x * x * threshold, threshold, 5.0, 5.0 * omega).unwrap();
        let budget = EfficiencyBudget::new(qe, escape, prop, vis).unwrap();
        let v = detected_variances(&cfg, &budget).unwrap();
        prop_assert!(v.product() >= 1.0 - 1e-12);
        if budget.total() < 1.0 && x > 0.0 {
            prop_assert!(v.product() > 1.0);
        }
    }

    #[test]
    fn fit_round_trip(x in 0.0..0.95f64) {
        let fit = fit_pump_parameter(&classical_gains(x).unwrap()).unwrap();
        prop_assert!((fit.x - x).abs() <= 1e-4, "{} vs {}", fit.x, x);
    }
}

#[test]
fn loss_closed_form_matches_two_mode_sampling() {
    // squeezed input with v_plus = 0.5 mixed with vacuum on a 50/50 splitter
    let eta: f64 = 0.5;
    let n = 400_000;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut sx, mut sxx) = (0.0, 0.0);
    for _ in 0..n {
        let a: f64 = StandardNormal.sample(&mut rng);
        let b: f64 = StandardNormal.sample(&mut rng);
        let x = eta.sqrt() * 0.5f64.sqrt() * a - (1.0 - eta).sqrt() * b;
        sx += x;
        sxx += x * x;
    }
    let mean = sx / n as f64;
    let var = (sxx - n as f64 * mean * mean) / (n as f64 - 1.0);
    let stderr = var * (2.0 / (n as f64 - 1.0)).sqrt();

    let m = GaussianMode::from_variances(QuadratureVariancePair::new(0.5, 2.0).unwrap(), 0.0, 0.0).unwrap();
    let closed = apply_loss(&m, eta).unwrap().variances().v_plus;
    assert_abs_diff_eq!(closed, 0.75, epsilon = 1e-15);
    assert!((var - closed).abs() < 5.0 * stderr, "{var} vs {closed} +/- {stderr}");
}

#[test]
fn spectrum_monotone_on_grids() {
    for j in 0..=20 {
        let omega = j as f64 * 0.25;
        let mut last = f64::INFINITY;
        for i in 0..100 {
            let x = i as f64 / 100.0;
            let v = squeezing_spectrum(x, omega, 0.9).unwrap().v_plus;
            assert!(v < last, "not decreasing in x at x={x}, omega={omega}");
            last = v;
        }
    }
    for i in 1..100 {
        let x = i as f64 / 100.0;
        let mut last = 0.0;
        for j in 0..=40 {
            let v = squeezing_spectrum(x, j as f64 * 0.1, 0.9).unwrap().v_plus;
            assert!(v > last, "not increasing in omega at x={x}, omega={}", j as f64 * 0.1);
            last = v;
        }
    }
}

#[test]
fn lossless_budget_reproduces_ideal_spectrum() {
    let budget = EfficiencyBudget::new(1.0, 1.0, 1.0, 1.0).unwrap();
    for pump in [0.0, 10.0, 49.0, 120.0, 200.0] {
        for f in [0.0, 1.0, 2.0, 7.5] {
            let cfg = OpaConfig::new(pump, 232.9, 5.0, f).unwrap();
            let detected = detected_variances(&cfg, &budget).unwrap();
            let ideal = squeezing_spectrum(cfg.pump_parameter().unwrap(), cfg.omega_norm(), 1.0).unwrap();
            assert_eq!(detected, ideal);
        }
    }
}

#[test]
fn fit_agrees_with_brute_force_grid() {
    // independent oracle: dense scan of the same least-squares objective
    let cases = [(3.2, 0.47), (2.0, 0.6), (5.0, 0.3), (1.1, 0.95), (10.0, 0.5)];
    for (amp, deamp) in cases {
        let measured = GainPair {
            amplification: amp,
            deamplification: deamp,
        };
        let fit = fit_pump_parameter(&measured).unwrap();
        let objective = |x: f64| {
            let g = classical_gains(x).unwrap();
            (g.amplification - amp).powi(2) + (g.deamplification - deamp).powi(2)
        };
        let n = 2_000_000;
        let (best_x, best) = (0..=n)
            .map(|i| FIT_X_MAX * i as f64 / n as f64)
            .map(|x| (x, objective(x)))
            .fold((0.0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
        assert!(
            fit.residual <= best + 1e-12,
            "({amp}, {deamp}): {} > {best}",
            fit.residual
        );
        assert!((fit.x - best_x).abs() < 1e-5, "({amp}, {deamp}): {} vs {best_x}", fit.x);
    }
}

#[test]
fn uncertainty_pairing_for_dominant_bright_beam() {
    let pair = QuadratureVariancePair::new(0.4169, 3.162).unwrap();
    let v = GaussianMode::from_variances(pair, 0.1, 0.0).unwrap();
    let state = build_polarization_state(GaussianMode::coherent(10.0, 0.0), v, 0.0).unwrap();
    let m = stokes_variances(&state).unwrap();
    let product = m.normalized[2] * m.normalized[3];
    assert!((product - pair.product()).abs() <= 0.02 * pair.product(), "{product}");
    assert!(product >= 1.0);
}

#[test]
fn zero_span_stderr_scales_with_averages() {
    let s20 = AnalyzerSettings {
        n_average: 20,
        ..AnalyzerSettings::default()
    };
    let s80 = AnalyzerSettings { n_average: 80, ..s20 };
    let seeds = 0..200u64;
    let spread = |s: &AnalyzerSettings| {
        // empirical scatter of the mean across seeds, and the mean reported stderr
        let runs: Vec<_> = seeds
            .clone()
            .map(|k| zero_span_measurement(0.4169, s, k).unwrap())
            .collect();
        let n = runs.len() as f64;
        let mu = runs.iter().map(|r| r.mean_db).sum::<f64>() / n;
        let sd = (runs.iter().map(|r| (r.mean_db - mu).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        let reported = runs.iter().map(|r| r.stderr_db).sum::<f64>() / n;
        (sd, reported)
    };
    let (sd20, rep20) = spread(&s20);
    let (sd80, rep80) = spread(&s80);
    let ratio = rep20 / rep80;
    assert!((ratio - 2.0).abs() <= 0.4, "reported ratio {ratio}");
    let empirical = sd20 / sd80;
    assert!((empirical - 2.0).abs() <= 0.4, "empirical ratio {empirical}");
    // the reported stderr describes the actual scatter
    assert!((rep20 / sd20 - 1.0).abs() < 0.2, "{rep20} vs {sd20}");
}

#[test]
fn stochastic_operations_are_pure_in_seed() {
    let s = AnalyzerSettings::default();
    let a = scanned_trace(-4.1, 5.3, &s, 8.0 * PI, 3).unwrap();
    let b = scanned_trace(-4.1, 5.3, &s, 8.0 * PI, 3).unwrap();
    let c = scanned_trace(-4.1, 5.3, &s, 8.0 * PI, 4).unwrap();
    assert_eq!(a.y_db, b.y_db);
    assert_ne!(a.y_db, c.y_db);
}
