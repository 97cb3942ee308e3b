//! Structured pass/fail records produced by every verification routine.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::spectrum::Spectrum;

pub const TOOL_NAME: &str = "numra";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// One verified condition. `pass` is always `max_deviation <= tolerance`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionEntry {
    pub condition: String,
    pub anchor: String,
    #[serde(default)]
    pub parameters: Value,
    #[serde(default)]
    pub truncation: Value,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub pass: bool,
    #[serde(default)]
    pub values: Value,
}

impl ConditionEntry {
    pub fn new(
        condition: impl Into<String>,
        anchor: impl Into<String>,
        max_deviation: f64,
        tolerance: f64,
    ) -> Self {
        // JSON has no infinities; an unbounded deviation is recorded as MAX
        let pass = max_deviation <= tolerance;
        let max_deviation = if max_deviation.is_finite() { max_deviation } else { f64::MAX };
        ConditionEntry {
            condition: condition.into(),
            anchor: anchor.into(),
            parameters: Value::Null,
            truncation: Value::Null,
            max_deviation,
            tolerance,
            pass,
            values: Value::Null,
        }
    }

    pub fn with_parameters(mut self, parameters: Value) -> Self {
        self.parameters = parameters;
        self
    }

    pub fn with_truncation(mut self, truncation: Value) -> Self {
        self.truncation = truncation;
        self
    }

    pub fn with_values(mut self, values: Value) -> Self {
        self.values = values;
        self
    }
}

/// Full output of a certification run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CertificationReport {
    pub schema_version: u32,
    pub tool: String,
    pub tool_version: String,
    pub spectrum: Spectrum,
    /// Everything needed to rerun: grid, truncations, seed, and the bank itself.
    pub parameters: Value,
    pub seed: u64,
    pub entries: Vec<ConditionEntry>,
    pub complete: bool,
    pub pass: bool,
    pub wall_time_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

impl CertificationReport {
    pub fn new(spectrum: Spectrum, parameters: Value, seed: u64) -> Self {
        CertificationReport {
            schema_version: REPORT_SCHEMA_VERSION,
            tool: TOOL_NAME.to_string(),
            tool_version: TOOL_VERSION.to_string(),
            spectrum,
            parameters,
            seed,
            entries: Vec::new(),
            complete: false,
            pass: false,
            wall_time_s: 0.0,
            failure: None,
        }
    }

    pub fn push(&mut self, entry: ConditionEntry) {
        self.entries.push(entry);
    }

    pub fn entry(&self, condition: &str) -> Option<&ConditionEntry> {
        self.entries.iter().find(|e| e.condition == condition)
    }

    /// Marks the report complete and folds the per-entry verdicts.
    pub fn finish(&mut self, wall_time_s: f64) {
        self.complete = self.failure.is_none();
        self.pass = self.complete && self.entries.iter().all(|e| e.pass);
        self.wall_time_s = wall_time_s;
    }
}
