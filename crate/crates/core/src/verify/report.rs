//! Check records, tolerances and the versioned verification report.

use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use super::config::Config;
use super::fit::{Bound, Fit};
use super::Suite;
use crate::error::Result;

/// Version tag of the report layout.
pub const REPORT_SCHEMA: &str = "levikernel.report/1";

/// Largest admissible relative change of a fitted constant under one refinement level.
pub const STABILITY_LIMIT: f64 = 0.1;

/// Acceptance rule applied to the primary value of a check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Tolerance {
    AtMost { limit: f64 },
    AtLeast { limit: f64 },
    Within { lo: f64, hi: f64 },
    /// Finite and strictly positive.
    Positive,
    Finite,
}

impl Tolerance {
    pub fn accepts(&self, value: f64) -> bool {
        match *self {
            Tolerance::AtMost { limit } => value <= limit,
            Tolerance::AtLeast { limit } => value >= limit,
            Tolerance::Within { lo, hi } => (lo..=hi).contains(&value),
            Tolerance::Positive => value.is_finite() && value > 0.0,
            Tolerance::Finite => value.is_finite(),
        }
    }
}

/// A named CSV table attached to a check.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: impl Into<String>, columns: &[&'static str]) -> Self {
        Table { name: name.into(), columns: columns.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| format!("{v:e}")))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// What a check measured, before pass/fail is decided.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub value: f64,
    pub tolerance: Tolerance,
    pub fit: Option<Fit>,
    /// Applied to `fit.stability_delta` when both are present.
    pub stability_limit: Option<f64>,
    pub grid: Value,
    pub detail: Value,
    pub tables: Vec<Table>,
    pub plots: Vec<Table>,
}

impl Outcome {
    pub fn new(value: f64, tolerance: Tolerance) -> Self {
        Outcome {
            value,
            tolerance,
            fit: None,
            stability_limit: None,
            grid: Value::Null,
            detail: Value::Null,
            tables: Vec::new(),
            plots: Vec::new(),
        }
    }

    pub fn at_most(value: f64, limit: f64) -> Self {
        Self::new(value, Tolerance::AtMost { limit })
    }

    pub fn at_least(value: f64, limit: f64) -> Self {
        Self::new(value, Tolerance::AtLeast { limit })
    }

    pub fn within(value: f64, lo: f64, hi: f64) -> Self {
        Self::new(value, Tolerance::Within { lo, hi })
    }

    /// Upper-bound fit: the supremum must be finite.
    pub fn fitted_upper(fit: Fit) -> Self {
        let mut o = Self::new(fit.sup, Tolerance::Finite);
        o.stability_limit = fit.stability_delta.map(|_| STABILITY_LIMIT);
        o.fit = Some(fit);
        o
    }

    /// Lower-bound fit: the infimum must be finite and positive.
    pub fn fitted_lower(fit: Fit) -> Self {
        let mut o = Self::new(fit.inf, Tolerance::Positive);
        o.stability_limit = fit.stability_delta.map(|_| STABILITY_LIMIT);
        o.fit = Some(fit);
        o
    }

    /// Two-sided fit: the primary value is `inf/sup`, positive iff both constants exist.
    pub fn fitted_two_sided(fit: Fit) -> Self {
        let value = if fit.sup.is_finite() && fit.sup > 0.0 { fit.inf / fit.sup } else { f64::NAN };
        let mut o = Self::new(value, Tolerance::Positive);
        o.stability_limit = fit.stability_delta.map(|_| STABILITY_LIMIT);
        o.fit = Some(fit);
        o
    }

    /// The fitted outcome matching the side of `bound`.
    pub fn fitted(bound: Bound, fit: Fit) -> Self {
        match bound {
            Bound::Upper => Self::fitted_upper(fit),
            Bound::Lower => Self::fitted_lower(fit),
            Bound::TwoSided => Self::fitted_two_sided(fit),
        }
    }

    pub fn grid(mut self, grid: Value) -> Self {
        self.grid = grid;
        self
    }

    pub fn detail(mut self, detail: Value) -> Self {
        self.detail = detail;
        self
    }

    pub fn table(mut self, table: Table) -> Self {
        self.tables.push(table);
        self
    }

    pub fn plot(mut self, table: Table) -> Self {
        self.plots.push(table);
        self
    }

    pub fn passes(&self) -> bool {
        let stable = match (self.stability_limit, self.fit.as_ref().and_then(|f| f.stability_delta)) {
            (Some(limit), Some(delta)) => delta <= limit,
            _ => true,
        };
        self.tolerance.accepts(self.value) && stable
    }
}

/// One entry of the report.
#[derive(Debug, Clone, Serialize)]
pub struct CheckRecord {
    pub id: String,
    pub suite: Suite,
    pub profile: String,
    /// The estimate or identity under test, stated in words.
    pub anchor: String,
    pub value: f64,
    pub tolerance: Tolerance,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit: Option<Fit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stability_limit: Option<f64>,
    pub grid: Value,
    pub detail: Value,
    pub tables: Vec<String>,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub wall_time: f64,
    #[serde(skip)]
    pub(crate) outcome_tables: Vec<Table>,
    #[serde(skip)]
    pub(crate) outcome_plots: Vec<Table>,
}

impl CheckRecord {
    pub(crate) fn from_outcome(id: &str, suite: Suite, profile: &str, anchor: &str, outcome: Outcome, wall_time: f64) -> Self {
        let pass = outcome.passes();
        let tables = outcome.tables.iter().map(|t| table_path(profile, id, &t.name)).collect();
        CheckRecord {
            id: id.to_string(),
            suite,
            profile: profile.to_string(),
            anchor: anchor.to_string(),
            value: outcome.value,
            tolerance: outcome.tolerance,
            fit: outcome.fit,
            stability_limit: outcome.stability_limit,
            grid: outcome.grid,
            detail: outcome.detail,
            tables,
            pass,
            error: None,
            wall_time,
            outcome_tables: outcome.tables,
            outcome_plots: outcome.plots,
        }
    }

    pub(crate) fn failed(id: &str, suite: Suite, profile: &str, anchor: &str, error: String, wall_time: f64) -> Self {
        CheckRecord {
            id: id.to_string(),
            suite,
            profile: profile.to_string(),
            anchor: anchor.to_string(),
            value: f64::NAN,
            tolerance: Tolerance::Finite,
            fit: None,
            stability_limit: None,
            grid: Value::Null,
            detail: Value::Null,
            tables: Vec::new(),
            pass: false,
            error: Some(error),
            wall_time,
            outcome_tables: Vec::new(),
            outcome_plots: Vec::new(),
        }
    }
}

/// Relative path of a check table inside the output directory.
pub fn table_path(profile: &str, id: &str, name: &str) -> String {
    if name.is_empty() {
        format!("tables/{profile}/{id}.csv")
    } else {
        format!("tables/{profile}/{id}.{name}.csv")
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub total: usize,
    pub passed: usize,
    pub failed: Vec<String>,
}

/// The full machine-readable result of a run.
#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    pub schema: &'static str,
    pub version: &'static str,
    pub suites: Vec<Suite>,
    pub refine: u32,
    pub config: Config,
    pub checks: Vec<CheckRecord>,
    pub plots: Vec<String>,
    pub summary: Summary,
    pub wall_time: f64,
}

impl VerificationReport {
    pub(crate) fn new(config: Config, suites: Vec<Suite>, refine: u32, checks: Vec<CheckRecord>, plots: Vec<String>, wall_time: f64) -> Self {
        let failed: Vec<String> = checks.iter().filter(|c| !c.pass).map(|c| format!("{}[{}]: {}", c.id, c.profile, c.anchor)).collect();
        let summary = Summary { total: checks.len(), passed: checks.len() - failed.len(), failed };
        VerificationReport { schema: REPORT_SCHEMA, version: env!("CARGO_PKG_VERSION"), suites, refine, config, checks, plots, summary, wall_time }
    }

    pub fn all_passed(&self) -> bool {
        self.summary.failed.is_empty()
    }

    pub fn check(&self, id: &str, profile: &str) -> Option<&CheckRecord> {
        self.checks.iter().find(|c| c.id == id && c.profile == profile)
    }

    /// The report as JSON; NaN values serialize as `null`.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tolerances_accept_their_ranges() {
        assert!(Tolerance::AtMost { limit: 1e-6 }.accepts(5e-7));
        assert!(!Tolerance::AtMost { limit: 1e-6 }.accepts(f64::NAN));
        assert!(Tolerance::Within { lo: 0.999, hi: 1.001 }.accepts(1.0005));
        assert!(!Tolerance::Positive.accepts(0.0));
        assert!(!Tolerance::Finite.accepts(f64::INFINITY));
    }

    #[test]
    fn unstable_fit_fails() {
        let fit = Fit { sup: 2.0, inf: 0.1, sup_at: String::new(), inf_at: String::new(), stability_delta: Some(0.2), points: 4 };
        assert!(!Outcome::fitted_upper(fit.clone()).passes());
        let stable = Fit { stability_delta: Some(0.01), ..fit };
        assert!(Outcome::fitted_upper(stable).passes());
    }
}
