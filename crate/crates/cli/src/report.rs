//! Metric rows and scenario reports.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Check {
    /// `value ≤ tolerance`.
    AtMost,
    /// `value ≥ tolerance`.
    AtLeast,
    /// `|value − target| ≤ tolerance · |target|`.
    Relative,
    /// `|value − target| ≤ tolerance`.
    Absolute,
    /// `value == target` exactly (counts).
    Exact,
    /// `value == 1`.
    Flag,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub name: String,
    pub check: Check,
    pub value: f64,
    pub target: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl MetricRow {
    fn new(name: impl Into<String>, check: Check, value: f64, target: f64, tolerance: f64) -> Self {
        let pass = match check {
            Check::AtMost => value <= tolerance,
            Check::AtLeast => value >= tolerance,
            Check::Relative => (value - target).abs() <= tolerance * target.abs(),
            Check::Absolute => (value - target).abs() <= tolerance,
            Check::Exact => value == target,
            Check::Flag => value == 1.0,
        };
        Self { name: name.into(), check, value, target, tolerance, pass }
    }

    pub fn at_most(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self::new(name, Check::AtMost, value, 0.0, bound)
    }

    pub fn at_least(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self::new(name, Check::AtLeast, value, 0.0, bound)
    }

    pub fn relative(name: impl Into<String>, value: f64, target: f64, tol: f64) -> Self {
        Self::new(name, Check::Relative, value, target, tol)
    }

    pub fn absolute(name: impl Into<String>, value: f64, target: f64, tol: f64) -> Self {
        Self::new(name, Check::Absolute, value, target, tol)
    }

    pub fn exact(name: impl Into<String>, value: f64, target: f64) -> Self {
        Self::new(name, Check::Exact, value, target, 0.0)
    }

    pub fn flag(name: impl Into<String>, ok: bool) -> Self {
        Self::new(name, Check::Flag, if ok { 1.0 } else { 0.0 }, 1.0, 0.0)
    }

    /// One-line rendering used by the CLI and the acceptance runner.
    pub fn describe(&self) -> String {
        let verdict = if self.pass { "PASS" } else { "FAIL" };
        let rule = match self.check {
            Check::AtMost => format!("{:.6e} <= {:.3e}", self.value, self.tolerance),
            Check::AtLeast => format!("{:.6e} >= {:.3e}", self.value, self.tolerance),
            Check::Relative => format!("{:.10e} vs {:.10e} (rel {:.1e})", self.value, self.target, self.tolerance),
            Check::Absolute => format!("{:.10e} vs {:.10e} (abs {:.1e})", self.value, self.target, self.tolerance),
            Check::Exact => format!("{} == {}", self.value, self.target),
            Check::Flag => (if self.value == 1.0 { "true" } else { "false" }).to_string(),
        };
        format!("{verdict} {}: {rule}", self.name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub scenario: String,
    /// SHA-256 of the canonical JSON of the resolved configuration.
    pub input_hash: String,
    /// Resolved configuration, defaults included.
    pub config: serde_json::Value,
    pub rows: Vec<MetricRow>,
    /// Data files written next to the report, relative to the output directory.
    pub files: Vec<String>,
    pub pass: bool,
}

impl Report {
    pub fn new(scenario: &str, config: serde_json::Value) -> Self {
        let input_hash = hash_json(&config);
        Self { scenario: scenario.to_string(), input_hash, config, rows: Vec::new(), files: Vec::new(), pass: true }
    }

    pub fn push(&mut self, row: MetricRow) {
        self.pass &= row.pass;
        self.rows.push(row);
    }

    pub fn failures(&self) -> impl Iterator<Item = &MetricRow> {
        self.rows.iter().filter(|r| !r.pass)
    }
}

/// Hex SHA-256 of the compact JSON rendering. `serde_json::Value` keeps object
/// keys sorted, so the rendering is canonical.
pub fn hash_json(value: &serde_json::Value) -> String {
    let bytes = serde_json::to_vec(value).expect("JSON values always serialize");
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checks_evaluate_as_documented() {
        assert!(MetricRow::at_most("a", 1.0, 1.0).pass);
        assert!(!MetricRow::at_most("a", f64::NAN, 1.0).pass);
        assert!(MetricRow::at_least("a", 2.0, 1.0).pass);
        assert!(MetricRow::relative("a", 1.04, 1.0, 0.05).pass);
        assert!(!MetricRow::relative("a", 1.06, 1.0, 0.05).pass);
        assert!(MetricRow::absolute("a", -1e-9, 0.0, 1e-8).pass);
        assert!(MetricRow::exact("a", 6.0, 6.0).pass);
        assert!(!MetricRow::flag("a", false).pass);
    }

    #[test]
    fn report_pass_is_conjunction_of_rows() {
        let mut r = Report::new("x", serde_json::json!({"b": 1, "a": 2}));
        r.push(MetricRow::flag("ok", true));
        assert!(r.pass);
        r.push(MetricRow::flag("bad", false));
        assert!(!r.pass);
        assert_eq!(r.failures().count(), 1);
    }

    #[test]
    fn hash_ignores_key_insertion_order() {
        let a = serde_json::json!({"b": 1, "a": [1.5, 2.0]});
        let b: serde_json::Value = serde_json::from_str(r#"{"a":[1.5,2.0],"b":1}"#).unwrap();
        assert_eq!(hash_json(&a), hash_json(&b));
        assert_eq!(hash_json(&a).len(), 64);
    }
}
