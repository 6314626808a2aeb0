//! Pump parameter from measured classical gains.
//!
//! `cargo run --example gain_fit -- 3.2 0.47`

use polsqueeze::opa::{classical_gains, fit_pump_parameter};
use polsqueeze::GainPair;

fn main() -> polsqueeze::Result<()> {
    let args: Vec<f64> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let (amp, deamp) = match args[..] {
        [a, d] => (a, d),
        _ => (3.2, 0.47),
    };
    let fit = fit_pump_parameter(&GainPair {
        amplification: amp,
        deamplification: deamp,
    })?;
    println!("measured   {amp} / {deamp}");
    println!("x*         {:.6}", fit.x);
    println!(
        "model      {:.4} / {:.4}",
        fit.model.amplification, fit.model.deamplification
    );
    println!("residual   {:.3e}", fit.residual);

    // each gain on its own gives a different x; the fit sits between them
    println!("x from amplification only      {:.4}", 1.0 - 1.0 / amp.sqrt());
    println!("x from de-amplification only   {:.4}", 1.0 / deamp.sqrt() - 1.0);

    let check = classical_gains(fit.x)?;
    assert_eq!(check, fit.model);
    Ok(())
}
