//! Text, CSV and JSON emitters.

use std::io::{self, Write};

use serde_json::{json, Map, Value};

use crate::detection::{NoiseTrace, TraceAxis};

/// Formats `x` with 6 significant digits.
///
/// Plain notation for magnitudes in `[1e-4, 1e6)`, scientific otherwise.
pub fn fmt_sig(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return "0.00000".into();
    }
    let mag = x.abs().log10().floor() as i32;
    if !(-4..6).contains(&mag) {
        return format!("{x:.5e}");
    }
    let decimals = (5 - mag).max(0) as usize;
    let s = format!("{x:.decimals$}");
    // rounding up to the next decade adds a digit, e.g. 9.999996 -> 10.00000
    let rounded: f64 = s.parse().unwrap_or(x);
    if rounded.abs() >= 10f64.powi(mag + 1) && decimals > 0 {
        let decimals = decimals - 1;
        format!("{x:.decimals$}")
    } else {
        s
    }
}

/// `+5.00 dB` style, two decimals.
pub fn fmt_db(db: f64) -> String {
    format!("{db:+.2} dB")
}

/// Writes a trace as CSV: `#` metadata lines, a header, one row per point.
pub fn emit_trace_csv<W: Write + ?Sized>(
    trace: &NoiseTrace,
    extra_meta: &[(&str, String)],
    out: &mut W,
) -> io::Result<()> {
    let s = &trace.settings;
    let mode = match trace.axis {
        TraceAxis::Phase => "scanned phase",
        TraceAxis::Time => "locked zero span",
    };
    writeln!(out, "# polsqueeze noise trace ({mode}), dB relative to QNL")?;
    writeln!(out, "# center_frequency_mhz = {}", fmt_sig(s.center_frequency))?;
    writeln!(out, "# rbw_khz = {}", fmt_sig(s.rbw))?;
    writeln!(out, "# vbw_hz = {}", fmt_sig(s.vbw))?;
    writeln!(out, "# n_average = {}", s.n_average)?;
    writeln!(out, "# sweep_time_s = {}", fmt_sig(s.sweep_time))?;
    for (k, v) in extra_meta {
        writeln!(out, "# {k} = {v}")?;
    }
    writeln!(out, "# seed = {}", trace.seed)?;
    let header = match trace.axis {
        TraceAxis::Phase => "phase_rad,noise_db",
        TraceAxis::Time => "time_s,noise_db",
    };
    writeln!(out, "{header}")?;
    for (x, y) in trace.x_values.iter().zip(&trace.y_db) {
        writeln!(out, "{},{}", fmt_sig(*x), fmt_sig(*y))?;
    }
    Ok(())
}

/// Accumulates one command's numbers for both output styles, so the human
/// text and the JSON object are rendered from the same values.
#[derive(Debug)]
pub struct Report {
    pub command: &'static str,
    pub inputs: Value,
    pub outputs: Map<String, Value>,
    pub seed: u64,
    lines: Vec<String>,
}

const LABEL_WIDTH: usize = 30;

impl Report {
    pub fn new(command: &'static str, inputs: Value, seed: u64) -> Self {
        Self {
            command,
            inputs,
            outputs: Map::new(),
            seed,
            lines: Vec::new(),
        }
    }

    pub fn heading(&mut self, text: &str) {
        self.lines.push(text.to_string());
    }

    pub fn line(&mut self, text: String) {
        self.lines.push(text);
    }

    /// Plain number.
    pub fn value(&mut self, key: &str, label: &str, v: f64) {
        self.outputs.insert(key.into(), json!(v));
        self.lines.push(format!("  {label:<LABEL_WIDTH$}{}", fmt_sig(v)));
    }

    /// Noise level relative to QNL: stored as `key` (linear) and `key_db`.
    pub fn level(&mut self, key: &str, label: &str, linear: f64) {
        let db = 10.0 * linear.log10();
        self.outputs.insert(key.into(), json!(linear));
        self.outputs.insert(format!("{key}_db"), json!(db));
        self.lines.push(format!(
            "  {label:<LABEL_WIDTH$}{}  (V = {})",
            fmt_db(db),
            fmt_sig(linear)
        ));
    }

    pub fn insert(&mut self, key: &str, v: Value) {
        self.outputs.insert(key.into(), v);
    }

    pub fn to_json(&self) -> Value {
        json!({
            "command": self.command,
            "inputs": self.inputs,
            "outputs": Value::Object(self.outputs.clone()),
            "seed": self.seed,
        })
    }

    pub fn emit_human<W: Write + ?Sized>(&self, out: &mut W) -> io::Result<()> {
        for l in &self.lines {
            writeln!(out, "{l}")?;
        }
        Ok(())
    }
}

/// Pretty-printed JSON object followed by a newline.
pub fn emit_report_json<W: Write + ?Sized>(report: &Report, out: &mut W) -> io::Result<()> {
    let text = serde_json::to_string_pretty(&report.to_json()).expect("report values are serializable");
    writeln!(out, "{text}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detection::AnalyzerSettings;

    #[test]
    fn six_significant_digits() {
        assert_eq!(fmt_sig(0.0), "0.00000");
        assert_eq!(fmt_sig(-4.1), "-4.10000");
        assert_eq!(fmt_sig(0.903080038707), "0.903080");
        assert_eq!(fmt_sig(25.132741228718345), "25.1327");
        assert_eq!(fmt_sig(232.93430078), "232.934");
        assert_eq!(fmt_sig(0.00123456789), "0.00123457");
        assert_eq!(fmt_sig(9.9999996), "10.0000");
        assert_eq!(fmt_sig(1_000_000.0), "1.00000e6");
        assert_eq!(fmt_sig(1.5e-7), "1.50000e-7");
    }

    #[test]
    fn trace_csv_layout() {
        let trace = NoiseTrace {
            axis: TraceAxis::Phase,
            x_values: vec![0.0, 0.5],
            y_db: vec![-4.1, 5.3],
            settings: AnalyzerSettings::default(),
            seed: 7,
            qnl_reference_db: 0.0,
        };
        let mut buf = Vec::new();
        emit_trace_csv(&trace, &[], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.ends_with("0.500000,5.30000\n"), "{text}");
        let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(rows, ["phase_rad,noise_db", "0.00000,-4.10000", "0.500000,5.30000"]);
        assert!(text.contains("# rbw_khz = 100.000"));
        assert!(text.contains("# seed = 7"));
    }

    #[test]
    fn report_renders_both_styles() {
        let mut r = Report::new("budget", json!({}), 0);
        r.value("eta_total", "total efficiency", 0.90308);
        r.level("v_plus", "squeezing", 0.2758);
        let j = r.to_json();
        assert_eq!(j["outputs"]["eta_total"], json!(0.90308));
        assert!(j["outputs"]["v_plus_db"].as_f64().unwrap() < 0.0);
        let keys: Vec<&String> = j.as_object().unwrap().keys().collect();
        assert_eq!(keys, ["command", "inputs", "outputs", "seed"]);
        let mut buf = Vec::new();
        r.emit_human(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("0.903080"));
        assert!(text.contains("-5.59 dB"));
    }
}
