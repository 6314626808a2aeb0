//! Noise power of S2 while the local-oscillator phase is scanned, as CSV.
//!
//! `cargo run --example scanned_trace > trace.csv`

use std::f64::consts::PI;

use polsqueeze::cli::output::emit_trace_csv;
use polsqueeze::detection::{scanned_trace, AnalyzerSettings};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let settings = AnalyzerSettings::default();
    let trace = scanned_trace(-4.1, 5.3, &settings, 8.0 * PI, 0)?;

    let lo = trace.y_db.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = trace.y_db.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    eprintln!("{} points, min {lo:.2} dB, max {hi:.2} dB", trace.y_db.len());

    emit_trace_csv(&trace, &[], &mut std::io::stdout().lock())?;
    Ok(())
}
