//! CSV and JSON writers.
//!
//! Floats are written in scientific notation with 17 significant digits, so
//! every value parses back to the same `f64`.
//!
//! | file           | columns                                                                          |
//! |----------------|----------------------------------------------------------------------------------|
//! | `perturb.csv`  | `lambda, residual_trace_norm`                                                    |
//! | `synth.csv`    | `gate, order, N, epsilon, initial_state, infidelity`                             |
//! | `synth_residuals.csv` | `block, epsilon, residual`                                                |
//! | `protocol.csv` | `lambda, N, backend, correction_rate, failure_rate, trials, ci_low, ci_high`     |
//!
//! In `protocol.csv` the interval bounds belong to `failure_rate`.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::CliError;

pub const PERTURB_HEADER: [&str; 2] = ["lambda", "residual_trace_norm"];
pub const SYNTH_HEADER: [&str; 6] = ["gate", "order", "N", "epsilon", "initial_state", "infidelity"];
pub const RESIDUAL_HEADER: [&str; 3] = ["block", "epsilon", "residual"];
pub const PROTOCOL_HEADER: [&str; 8] =
    ["lambda", "N", "backend", "correction_rate", "failure_rate", "trials", "ci_low", "ci_high"];

/// Lossless decimal form of a double.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<PathBuf, CliError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush().map_err(|e| CliError::Io(path.to_path_buf(), e))?;
    Ok(path.to_path_buf())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<PathBuf, CliError> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").map_err(|e| CliError::Io(path.to_path_buf(), e))?;
    Ok(path.to_path_buf())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, 2f64.sqrt() * 1e-300, 6.02214076e23, 0.0, -7.5e-9, f64::MIN_POSITIVE] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(fmt_f64(0.25), "2.5000000000000000e-1");
    }

    #[test]
    fn csv_has_header_and_rows() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        write_csv(&p, &PERTURB_HEADER, &[vec![fmt_f64(0.125), fmt_f64(2e-9)]]).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("lambda,residual_trace_norm"));
        assert_eq!(lines.next(), Some("1.2500000000000000e-1,2.0000000000000001e-9"));
        assert_eq!(lines.next(), None);
    }
}
