//! Stokes variances of a bright H beam combined with squeezed vacuum in V,
//! at both lock points.
//!
//! `cargo run --example stokes_report`

use std::f64::consts::FRAC_PI_2;

use polsqueeze::detection::{calibrate_input_variances, station_reading, StationKind, StationSetting};
use polsqueeze::stokes::{build_polarization_state, stokes_means};
use polsqueeze::{variance_from_db, GaussianMode, QuadratureVariancePair};

fn main() -> polsqueeze::Result<()> {
    let qe = 0.95;
    // levels we want to see behind the detectors
    let detected = QuadratureVariancePair::new(variance_from_db(-3.8), variance_from_db(5.0))?;
    let input = calibrate_input_variances(detected, qe)?;
    println!("input V mode: {:.4} / {:.4}", input.v_plus, input.v_minus);

    let h = GaussianMode::coherent(10.0, 0.0);
    let v = GaussianMode::from_variances(input, 0.0, 0.0)?;

    for theta in [0.0, FRAC_PI_2] {
        let state = build_polarization_state(h, v, theta)?;
        println!("\ntheta = {theta:.4}  means = {:?}", stokes_means(&state));
        for kind in [
            StationKind::SumDiff,
            StationKind::HalfWave,
            StationKind::HalfPlusQuarterWave,
        ] {
            for r in station_reading(&state, &StationSetting { kind, detector_qe: qe })? {
                println!("  {}  {:+.2} dB", r.observable.name(), r.db);
            }
        }
    }
    Ok(())
}
