use std::io::Write;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    /// rhs - lhs.
    pub slack: f64,
    /// slack >= -tol.
    pub passed: bool,
    pub tol: f64,
    pub fingerprint: String,
}

impl CheckReport {
    pub fn new(name: &str, lhs: f64, rhs: f64, tol: f64, fingerprint: String) -> Self {
        let slack = rhs - lhs;
        Self { name: name.to_string(), lhs, rhs, slack, passed: slack >= -tol, tol, fingerprint }
    }
}

pub const CSV_HEADER: &str = "name,lhs,rhs,slack,passed,tol,fingerprint";

/// 17 significant digits.
fn float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_csv<W: Write>(mut out: W, reports: &[CheckReport]) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in reports {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.name,
            float(r.lhs),
            float(r.rhs),
            float(r.slack),
            r.passed,
            float(r.tol),
            r.fingerprint
        )?;
    }
    Ok(())
}

pub fn write_json_lines<W: Write>(mut out: W, reports: &[CheckReport]) -> std::io::Result<()> {
    for r in reports {
        serde_json::to_writer(&mut out, r)?;
        writeln!(out)?;
    }
    Ok(())
}
