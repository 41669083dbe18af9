use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::calculus::MonteCarloEstimate;
use crate::error::Result;

/// Acceptance tolerances shared by every suite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerances {
    /// Monte Carlo checks pass within this many standard errors.
    pub mc_sigmas: f64,
    /// Absolute tolerance of identities that hold exactly on the grid.
    pub exact: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            mc_sigmas: 4.0,
            exact: 1e-10,
        }
    }
}

/// A parameter value in a report header.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Param {
    Int(u64),
    Real(f64),
    Text(String),
    List(Vec<f64>),
}

impl From<usize> for Param {
    fn from(v: usize) -> Self {
        Param::Int(v as u64)
    }
}

impl From<u64> for Param {
    fn from(v: u64) -> Self {
        Param::Int(v)
    }
}

impl From<f64> for Param {
    fn from(v: f64) -> Self {
        Param::Real(v)
    }
}

impl From<&str> for Param {
    fn from(v: &str) -> Self {
        Param::Text(v.to_string())
    }
}

impl From<String> for Param {
    fn from(v: String) -> Self {
        Param::Text(v)
    }
}

impl From<Vec<f64>> for Param {
    fn from(v: Vec<f64>) -> Self {
        Param::List(v)
    }
}

/// One comparison of a computed value against a reference.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    /// Short tag naming the identity being tested.
    pub identity: String,
    pub value: f64,
    pub reference: f64,
    pub tolerance: f64,
    pub pass: bool,
    /// Informational checks do not affect the exit status.
    pub hard: bool,
}

impl Check {
    /// `|value - reference| ≤ tolerance`.
    pub fn exact(name: impl Into<String>, identity: &str, value: f64, reference: f64, tolerance: f64) -> Self {
        Check {
            name: name.into(),
            identity: identity.into(),
            value,
            reference,
            tolerance,
            pass: (value - reference).abs() <= tolerance,
            hard: true,
        }
    }

    /// Monte Carlo mean against a deterministic reference, within `k` standard errors.
    pub fn monte_carlo(name: impl Into<String>, identity: &str, est: &MonteCarloEstimate, reference: f64, k: f64) -> Self {
        Self::exact(name, identity, est.mean, reference, k * est.std_error)
    }

    /// Two Monte Carlo means within `k` combined standard errors.
    pub fn monte_carlo_pair(
        name: impl Into<String>,
        identity: &str,
        a: &MonteCarloEstimate,
        b: &MonteCarloEstimate,
        k: f64,
    ) -> Self {
        Self::exact(name, identity, a.mean, b.mean, k * a.combined_se(b))
    }

    /// `value ≤ limit`.
    pub fn at_most(name: impl Into<String>, identity: &str, value: f64, limit: f64) -> Self {
        Check {
            name: name.into(),
            identity: identity.into(),
            value,
            reference: limit,
            tolerance: 0.0,
            pass: value <= limit,
            hard: true,
        }
    }

    /// A boolean property, recorded as 1 (holds) or 0.
    pub fn holds(name: impl Into<String>, identity: &str, ok: bool) -> Self {
        Check {
            name: name.into(),
            identity: identity.into(),
            value: if ok { 1.0 } else { 0.0 },
            reference: 1.0,
            tolerance: 0.0,
            pass: ok,
            hard: true,
        }
    }

    pub fn informational(mut self) -> Self {
        self.hard = false;
        self
    }

    /// `PASS name: value (reference ± tolerance)`.
    pub fn summary(&self) -> String {
        let status = match (self.pass, self.hard) {
            (true, _) => "PASS",
            (false, true) => "FAIL",
            (false, false) => "INFO",
        };
        format!(
            "{status} {}: {:.6e} (reference {:.6e} ± {:.3e}) [{}]",
            self.name, self.value, self.reference, self.tolerance, self.identity
        )
    }
}

/// Named table of numbers, written as CSV for external plotting.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Series {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Series {
    pub fn new(name: impl Into<String>, columns: &[&str]) -> Self {
        Series {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{}", self.columns.join(","))?;
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(|v| format!("{v:.16e}")).collect();
            writeln!(out, "{}", cells.join(","))?;
        }
        Ok(())
    }
}

/// Result of one verification suite.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub suite: String,
    pub kernel: String,
    pub params: BTreeMap<String, Param>,
    pub checks: Vec<Check>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    #[serde(skip)]
    pub series: Vec<Series>,
}

impl Report {
    pub fn new(suite: &str, kernel: impl Into<String>) -> Self {
        Report {
            suite: suite.into(),
            kernel: kernel.into(),
            params: BTreeMap::new(),
            checks: Vec::new(),
            notes: Vec::new(),
            series: Vec::new(),
        }
    }

    pub fn param(mut self, key: &str, value: impl Into<Param>) -> Self {
        self.params.insert(key.into(), value.into());
        self
    }

    pub fn push(&mut self, check: Check) {
        self.checks.push(check);
    }

    /// All hard checks pass.
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass || !c.hard)
    }

    pub fn summary_lines(&self) -> Vec<String> {
        self.checks
            .iter()
            .map(|c| format!("[{}:{}] {}", self.suite, self.kernel, c.summary()))
            .collect()
    }

    /// Writes every series as `<dir>/<suite>_<series>.csv`.
    pub fn write_plotdata(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for s in &self.series {
            let file = std::fs::File::create(dir.join(format!("{}_{}.csv", self.suite, s.name)))?;
            s.write_csv(std::io::BufWriter::new(file))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn informational_failures_do_not_fail_reports() {
        let mut r = Report::new("demo", "bm");
        r.push(Check::exact("a", "x", 1.0, 1.0, 0.0));
        r.push(Check::exact("b", "x", 1.0, 2.0, 0.1).informational());
        assert!(r.passed());
        r.push(Check::at_most("c", "x", 3.0, 2.0));
        assert!(!r.passed());
        assert!(r.summary_lines()[1].contains("INFO"));
    }
}
