//! Result records: what a run computed and which checks it passed.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::manifest::Task;

pub const TOOL_VERSION: &str = concat!("bellcheck ", env!("CARGO_PKG_VERSION"));

/// How a check compares `value` with `reference`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    /// `|value − reference| <= tolerance`
    Within,
    /// `value <= reference + tolerance`
    AtMost,
    /// `value > reference + tolerance`
    Exceeds,
}

/// One pass/fail verdict with both sides of the comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub relation: Relation,
    pub value: f64,
    pub reference: f64,
    pub tolerance: f64,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, relation: Relation, value: f64, reference: f64, tolerance: f64) -> Check {
        let passed = match relation {
            Relation::Within => (value - reference).abs() <= tolerance,
            Relation::AtMost => value <= reference + tolerance,
            Relation::Exceeds => value > reference + tolerance,
        };
        Check { name: name.into(), relation, value, reference, tolerance, passed, detail: String::new() }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Check {
        self.detail = detail.into();
        self
    }

    /// One-line summary, `PASS name: value rel reference (tol ...)`.
    pub fn summary(&self) -> String {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        let rel = match self.relation {
            Relation::Within => "≈",
            Relation::AtMost => "≤",
            Relation::Exceeds => ">",
        };
        let mut line = format!(
            "{verdict} {}: {} {rel} {} (tol {:e})",
            self.name,
            super::full(self.value),
            super::full(self.reference),
            self.tolerance
        );
        if !self.detail.is_empty() {
            line.push_str(": ");
            line.push_str(&self.detail);
        }
        line
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub manifest_digest: String,
    pub task: Task,
    pub inputs: Value,
    pub values: Value,
    pub checks: Vec<Check>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_seconds: Option<f64>,
    pub tool_version: String,
}

impl ResultRecord {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("record serializes")
    }
}
