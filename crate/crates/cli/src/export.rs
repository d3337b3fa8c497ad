//! Plot-ready CSV ladders, one file per test.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::battery::{DiagnosticsReport, Outcome};
use crate::error::{CliError, Result};

/// File stem for a test name, with everything but `[A-Za-z0-9._-]` mapped to `_`.
pub fn file_stem(test: &str) -> String {
    test.chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '.' | '-' | '_') { c } else { '_' })
        .collect()
}

/// The ladder of one test as CSV text.
pub fn ladder_csv(report: &DiagnosticsReport, test: &str) -> String {
    let mut out = String::from("points,half_length,spacing,value,status\n");
    for e in report.ladder(test) {
        let spacing = 2.0 * e.half_length / e.points as f64;
        let (value, status) = match (&e.outcome, e.outcome.headline()) {
            (Outcome::Error(_), _) | (_, None) => (String::new(), "error"),
            (_, Some(v)) => (format!("{v:e}"), "ok"),
        };
        let _ = writeln!(out, "{},{},{spacing:e},{value},{status}", e.points, e.half_length);
    }
    out
}

/// Writes one CSV per test into `dir`, returning the paths in report order.
pub fn write_ladders(report: &DiagnosticsReport, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut tests: Vec<&str> = Vec::new();
    for e in &report.entries {
        if !tests.contains(&e.test.as_str()) {
            tests.push(&e.test);
        }
    }
    tests
        .into_iter()
        .map(|t| {
            let path = dir.join(format!("{}.csv", file_stem(t)));
            std::fs::write(&path, ladder_csv(report, t)).map_err(|e| CliError::io(&path, e))?;
            Ok(path)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stems_are_portable() {
        assert_eq!(file_stem("fp:s=1.25"), "fp_s_1.25");
        assert_eq!(file_stem("calculus.riesz"), "calculus.riesz");
    }
}
