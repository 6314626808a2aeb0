//! Noise ellipsoid on the Poincare sphere and its plane projections.
//!
//! `cargo run --example noise_ellipsoid`

use std::f64::consts::FRAC_PI_2;

use polsqueeze::stokes::{build_polarization_state, noise_ellipsoid};
use polsqueeze::GaussianMode;

fn main() -> polsqueeze::Result<()> {
    let h = GaussianMode::coherent(10.0, 0.0);
    let v = GaussianMode::squeezed(0.4369, 0.0, 0.0, 0.0)?;
    for theta in [0.0, FRAC_PI_2] {
        let e = noise_ellipsoid(&build_polarization_state(h, v, theta)?)?;
        println!("theta = {theta:.4}");
        println!("  centre     {:?}", e.center);
        println!(
            "  semi-axes  {:.4} {:.4} {:.4}",
            e.semi_axes[0], e.semi_axes[1], e.semi_axes[2]
        );
        for p in &e.projections {
            println!(
                "  S{}-S{}  {:.4} x {:.4} at {:+.3} rad",
                p.plane.0, p.plane.1, p.semi_major, p.semi_minor, p.angle
            );
        }
    }
    Ok(())
}
