//! Serializable check reports.
//!
//! Verification in this crate is report-valued wherever the subject is a
//! model or a dataset rather than a single number: each check contributes a
//! named outcome with a human-readable detail line, and the report as a
//! whole carries the conjunction. Reports serialize to JSON for the
//! `verify` subcommand and are asserted on directly in tests.

use serde::Serialize;

/// Outcome of one named check.
#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    /// Short name of the property checked.
    pub name: String,
    /// Whether the property held everywhere sampled.
    pub passed: bool,
    /// First violation found, or a summary when passing.
    pub detail: String,
}

/// A set of named check outcomes with an overall verdict.
#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    /// True iff every check passed.
    pub passed: bool,
    /// Individual check outcomes, in the order run.
    pub checks: Vec<CheckOutcome>,
}

impl ValidationReport {
    /// Empty (vacuously passing) report.
    pub fn new() -> Self {
        Self {
            passed: true,
            checks: Vec::new(),
        }
    }

    /// Records one outcome and folds it into the verdict.
    pub fn push(&mut self, name: &str, passed: bool, detail: String) {
        self.passed &= passed;
        self.checks.push(CheckOutcome {
            name: name.to_string(),
            passed,
            detail,
        });
    }

    /// Records a residual-style outcome: passes iff `residual <= tol`.
    pub fn push_residual(&mut self, name: &str, residual: f64, tol: f64) {
        self.push(
            name,
            residual.is_finite() && residual <= tol,
            format!("residual {residual:.3e} (tolerance {tol:.1e})"),
        );
    }

    /// The outcome with the given name, if present.
    pub fn check(&self, name: &str) -> Option<&CheckOutcome> {
        self.checks.iter().find(|c| c.name == name)
    }
}

impl Default for ValidationReport {
    fn default() -> Self {
        Self::new()
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "[{}] {} — {}",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.detail
            )?;
        }
        Ok(())
    }
}
