use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use merl_core::merl::{MerlSpectrum, SeparabilityVerdict};

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

/// 17 significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Quote a CSV cell when needed.
pub fn cell(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn verdict_text(v: &Option<SeparabilityVerdict>) -> String {
    v.as_ref().map_or_else(|| "none".to_string(), |v| v.to_string())
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct AnalyzeReport {
    pub control_order: Vec<usize>,
    pub lines: Vec<f64>,
    pub splits: Vec<bool>,
    pub split_count: usize,
    pub split_tol: f64,
    pub verdict: Option<SeparabilityVerdict>,
    pub pruned_mass: f64,
    pub notes: Vec<String>,
}

impl AnalyzeReport {
    pub fn new(control_order: Vec<usize>, s: MerlSpectrum) -> Self {
        Self {
            control_order,
            lines: s.lines,
            splits: s.splits,
            split_count: s.split_count,
            split_tol: s.split_tol,
            verdict: s.verdict,
            pruned_mass: s.pruned_mass,
            notes: s.notes,
        }
    }

    pub fn csv(&self) -> String {
        let n = self.lines.len();
        let mut head: Vec<String> = (0..n).map(|m| format!("L{m}")).collect();
        head.extend(["split_count", "pruned_mass", "control_order", "verdict"].map(String::from));
        let mut row: Vec<String> = self.lines.iter().map(|&x| num(x)).collect();
        row.push(self.split_count.to_string());
        row.push(num(self.pruned_mass));
        row.push(self.control_order.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(" "));
        row.push(cell(&verdict_text(&self.verdict)));
        format!("{}\n{}\n", head.join(","), row.join(","))
    }
}

/// Writes `data` to `path`, or to `stdout` when no path is given.
pub fn emit(data: &str, path: Option<&Path>, stdout: &mut dyn Write) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, data).map_err(|e| CliError::io(p, e)),
        None => stdout.write_all(data.as_bytes()).map_err(|e| CliError::Parse(format!("stdout: {e}"))),
    }
}

pub fn json<T: Serialize>(value: &T) -> Result<String, CliError> {
    serde_json::to_string_pretty(value)
        .map(|mut s| {
            s.push('\n');
            s
        })
        .map_err(|e| CliError::Numeric(format!("cannot encode JSON: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [1.0 / 3.0, 14.0 / 3.0, 1e-300, -2.5, 0.0] {
            let s = num(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
            let mantissa = s.split('e').next().unwrap().trim_start_matches('-').replace('.', "");
            assert_eq!(mantissa.len(), 17);
        }
    }

    #[test]
    fn csv_quoting() {
        assert_eq!(cell("a|b"), "a|b");
        assert_eq!(cell("a,b"), "\"a,b\"");
    }
}
