//! Expected squeezing from the efficiency chain, and how it rolls off with
//! sideband frequency.
//!
//! `cargo run --example noise_budget`

use polsqueeze::opa::{classical_gains, detected_variances, squeezing_spectrum};
use polsqueeze::{EfficiencyBudget, OpaConfig};

fn main() -> polsqueeze::Result<()> {
    let opa = OpaConfig::default();
    let budget = EfficiencyBudget::default();
    let x = opa.pump_parameter()?;
    let gains = classical_gains(x)?;

    println!("threshold            {:.1} mW", opa.threshold_power);
    println!("pump parameter x     {x:.4}");
    println!(
        "gains                {:.3} / {:.3}",
        gains.amplification, gains.deamplification
    );
    println!("total efficiency     {:.4}", budget.total());

    let det = detected_variances(&opa, &budget)?;
    println!(
        "at {} MHz            {:+.2} dB / {:+.2} dB",
        opa.analysis_frequency,
        det.plus_db(),
        det.minus_db()
    );

    println!("\nfreq_mhz  opa_out_db  detected_db");
    for f in [0.5, 1.0, 2.0, 4.0, 8.0, 16.0] {
        let cfg = OpaConfig {
            analysis_frequency: f,
            ..opa
        };
        let out = squeezing_spectrum(x, cfg.omega_norm(), budget.escape)?;
        let det = detected_variances(&cfg, &budget)?;
        println!("{f:>8}  {:>10.2}  {:>11.2}", out.plus_db(), det.plus_db());
    }
    Ok(())
}
