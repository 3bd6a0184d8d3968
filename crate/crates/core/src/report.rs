//! JSON run report shared by the library batch runner and the CLI.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::Result;

/// Version tag written into every report.
pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    /// Trajectory (or task) index.
    pub index: usize,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub version: u32,
    pub command: String,
    /// Effective configuration after merging defaults, file and flags.
    pub config: Value,
    pub master_seed: u64,
    pub metrics: BTreeMap<String, Value>,
    pub failures: Vec<FailureRecord>,
    pub notes: Vec<String>,
    /// Wall-clock time; the only field that differs between identical runs.
    pub wall_ms: u64,
}

impl RunReport {
    pub fn new(command: impl Into<String>, config: &impl Serialize, master_seed: u64) -> Self {
        Self {
            version: REPORT_VERSION,
            command: command.into(),
            config: serde_json::to_value(config).unwrap_or(Value::Null),
            master_seed,
            metrics: BTreeMap::new(),
            failures: Vec::new(),
            notes: Vec::new(),
            wall_ms: 0,
        }
    }

    pub fn metric(&mut self, key: impl Into<String>, value: impl Serialize) -> &mut Self {
        self.metrics.insert(key.into(), serde_json::to_value(value).unwrap_or(Value::Null));
        self
    }

    pub fn note(&mut self, text: impl Into<String>) -> &mut Self {
        self.notes.push(text.into());
        self
    }

    /// Moves metrics, failures and notes of `other` under `prefix`.
    pub fn absorb(&mut self, prefix: &str, other: RunReport) {
        for (k, v) in other.metrics {
            self.metrics.insert(format!("{prefix}{k}"), v);
        }
        self.failures.extend(other.failures);
        self.notes.extend(other.notes);
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut text = self.to_json()?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let mut r = RunReport::new("generate", &serde_json::json!({"steps": 5}), 9);
        r.metric("count", 3).note("ok");
        r.failures.push(FailureRecord { index: 2, error: "boom".into() });
        let back: RunReport = serde_json::from_str(&r.to_json().unwrap()).unwrap();
        assert_eq!(back, r);
        assert_eq!(back.config["steps"], 5);
    }
}
