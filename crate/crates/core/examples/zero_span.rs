//! Locked zero-span readings and how their error bar shrinks with averaging.
//!
//! `cargo run --example zero_span`

use polsqueeze::detection::{zero_span_measurement, AnalyzerSettings};
use polsqueeze::variance_from_db;

fn main() -> polsqueeze::Result<()> {
    let level = variance_from_db(-3.8);
    for n_average in [1, 5, 20, 80, 320] {
        let settings = AnalyzerSettings {
            n_average,
            ..AnalyzerSettings::default()
        };
        let r = zero_span_measurement(level, &settings, 1)?;
        println!("{n_average:>4} averages: {:+.3} +/- {:.3} dB", r.mean_db, r.stderr_db);
    }
    Ok(())
}
