//! Sampled Stokes variances against the closed forms, at a general phase too.
//!
//! `cargo run --release --example monte_carlo_oracle`

use polsqueeze::detection::{monte_carlo_stokes_sharded, Observable};
use polsqueeze::stokes::{build_polarization_state, stokes_variances};
use polsqueeze::GaussianMode;

fn main() -> polsqueeze::Result<()> {
    let h = GaussianMode::coherent(10.0, 0.0);
    let v = GaussianMode::squeezed(0.4369, 0.0, 1.0, 0.0)?;
    let shards = std::thread::available_parallelism().map_or(1, |n| n.get().min(8));

    for theta in [0.0, 0.6, std::f64::consts::FRAC_PI_2] {
        let state = build_polarization_state(h, v, theta)?.with_general_theta(true);
        let analytic = stokes_variances(&state)?;
        let mc = monte_carlo_stokes_sharded(&state, 1_000_000, 42, shards)?;
        let z = mc.z_scores(&analytic.normalized);
        println!("theta = {theta}");
        for o in Observable::ALL {
            let i = o.index();
            println!(
                "  {}  analytic {:.5}  sampled {:.5} +/- {:.5}  z {:+.2}",
                o.name(),
                analytic.normalized[i],
                mc.normalized[i],
                mc.normalized_stderr[i],
                z[i]
            );
        }
    }
    Ok(())
}
