//! JSON reports.
//!
//! Keys are emitted in a fixed order (struct declaration order, sorted maps),
//! and floats use the shortest round-trip representation, so two runs that
//! compute the same numbers print the same bytes.

use std::collections::BTreeMap;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::kinematics::Calibration;

pub const SCHEMA: &str = "defectgeo-report/1";

/// One executed check. `pass` is exactly `max_residual <= tolerance`;
/// checks with `asserted = false` are measurements that never fail a run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub max_residual: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub asserted: bool,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub calibration: BTreeMap<String, f64>,
}

impl Check {
    pub fn new(name: impl Into<String>, max_residual: f64, tolerance: f64) -> Check {
        Check {
            name: name.into(),
            max_residual,
            tolerance,
            // NaN residuals fail
            pass: max_residual <= tolerance,
            asserted: true,
            calibration: BTreeMap::new(),
        }
    }

    pub fn informational(mut self) -> Check {
        self.asserted = false;
        self
    }

    pub fn with(mut self, key: &str, value: f64) -> Check {
        self.calibration.insert(key.to_string(), value);
        self
    }

    pub fn with_fit(self, fit: &Calibration) -> Check {
        self.with("mu", fit.mu)
            .with("relative_std", fit.relative_std)
            .with("relative_residual", fit.relative_residual)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Settings {
    pub grid_min: f64,
    pub grid_max: f64,
    pub grid_n: usize,
    pub tolerance: f64,
    pub strategy: String,
    pub step: f64,
    pub frank_mode: String,
    pub deterministic: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub schema: String,
    pub command: String,
    pub scenario_sha256: String,
    pub settings: Settings,
    pub checks: Vec<Check>,
    pub calibration: BTreeMap<String, f64>,
    pub values: BTreeMap<String, f64>,
    pub notes: Vec<String>,
    /// Wall time in seconds; `null` in deterministic mode.
    pub timing_seconds: Option<f64>,
}

impl Report {
    pub fn new(command: &str, scenario_text: &str, settings: Settings) -> Report {
        Report {
            schema: SCHEMA.to_string(),
            command: command.to_string(),
            scenario_sha256: fingerprint(scenario_text),
            settings,
            checks: Vec::new(),
            calibration: BTreeMap::new(),
            values: BTreeMap::new(),
            notes: Vec::new(),
            timing_seconds: None,
        }
    }

    /// Adds a check; a repeated name is a programming error.
    pub fn push(&mut self, check: Check) {
        assert!(
            self.checks.iter().all(|c| c.name != check.name),
            "check {} recorded twice",
            check.name
        );
        self.checks.push(check);
    }

    pub fn value(&mut self, key: impl Into<String>, v: f64) {
        self.values.insert(key.into(), v);
    }

    /// First failing asserted check.
    pub fn first_failure(&self) -> Option<&Check> {
        self.checks.iter().find(|c| c.asserted && !c.pass)
    }

    pub fn passed(&self) -> bool {
        self.first_failure().is_none()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

pub fn fingerprint(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn settings() -> Settings {
        Settings {
            grid_min: -1.0,
            grid_max: 1.0,
            grid_n: 9,
            tolerance: 1e-6,
            strategy: "symbolic".into(),
            step: 1e-4,
            frank_mode: "calibrated".into(),
            deterministic: true,
        }
    }

    #[test]
    fn pass_iff_within_tolerance() {
        assert!(Check::new("a", 1e-7, 1e-6).pass);
        assert!(Check::new("a", 1e-6, 1e-6).pass);
        assert!(!Check::new("a", 2e-6, 1e-6).pass);
        assert!(!Check::new("a", f64::NAN, 1e-6).pass);
    }

    #[test]
    fn informational_checks_do_not_fail() {
        let mut r = Report::new("check", "", settings());
        r.push(Check::new("soft", 1.0, 1e-6).informational());
        assert!(r.passed());
        r.push(Check::new("hard", 1.0, 1e-6));
        assert_eq!(r.first_failure().unwrap().name, "hard");
    }

    #[test]
    fn json_has_schema_and_null_timing() {
        let r = Report::new("check", "[numerics]\n", settings());
        let j = r.to_json();
        assert!(j.contains("\"schema\": \"defectgeo-report/1\""));
        assert!(j.contains("\"timing_seconds\": null"));
        assert_eq!(r.scenario_sha256.len(), 64);
    }
}
