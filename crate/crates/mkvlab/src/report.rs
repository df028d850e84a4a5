//! Report model written to `report.json`.

use std::collections::BTreeMap;

use mkvlab_core::bounds::BoundReport;
use serde::Serialize;
use serde_json::Value;

use crate::config::Kind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    /// `measured <= bound + tolerance`
    Le,
    /// `measured >= bound - tolerance`
    Ge,
    /// `|measured - bound| <= tolerance`
    Close,
}

/// One pass/fail comparison between a measured quantity and a bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub relation: Relation,
    pub measured: f64,
    pub bound: f64,
    pub tolerance: f64,
    /// Distance to the bound before the tolerance is applied; positive is
    /// on the safe side.
    pub margin: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub details: BTreeMap<String, Value>,
}

impl Check {
    fn build(name: &str, relation: Relation, measured: f64, bound: f64, tolerance: f64) -> Self {
        let (margin, pass) = match relation {
            Relation::Le => (bound - measured, measured <= bound + tolerance),
            Relation::Ge => (measured - bound, measured >= bound - tolerance),
            Relation::Close => {
                let d = (measured - bound).abs();
                (tolerance - d, d <= tolerance)
            }
        };
        Self {
            name: name.to_string(),
            relation,
            measured,
            bound,
            tolerance,
            margin,
            pass,
            details: BTreeMap::new(),
        }
    }

    pub fn le(name: &str, measured: f64, bound: f64, tolerance: f64) -> Self {
        Self::build(name, Relation::Le, measured, bound, tolerance)
    }

    pub fn ge(name: &str, measured: f64, bound: f64, tolerance: f64) -> Self {
        Self::build(name, Relation::Ge, measured, bound, tolerance)
    }

    pub fn close(name: &str, measured: f64, reference: f64, tolerance: f64) -> Self {
        Self::build(name, Relation::Close, measured, reference, tolerance)
    }

    /// A check that holds by construction, e.g. a decay curve that is
    /// identically zero.
    pub fn trivial(name: &str, reason: &str) -> Self {
        Self::build(name, Relation::Le, 0.0, 0.0, 0.0).with("trivial", reason)
    }

    pub fn with(mut self, key: &str, value: impl Serialize) -> Self {
        self.details.insert(
            key.to_string(),
            serde_json::to_value(value).unwrap_or(Value::Null),
        );
        self
    }
}

/// A bound evaluation tagged with the instance it belongs to.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabeledBound {
    pub label: String,
    #[serde(flatten)]
    pub report: BoundReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorInfo {
    /// Variant name of the numerical error.
    pub kind: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub kind: Kind,
    pub schema_version: u64,
    pub seed: u64,
    pub status: Status,
    pub checks: Vec<Check>,
    pub bounds: Vec<LabeledBound>,
    pub diagnostics: BTreeMap<String, Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorInfo>,
    pub config: Value,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }

    pub fn failed_checks(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }

    pub fn to_json(&self) -> Vec<u8> {
        let mut v = serde_json::to_vec_pretty(self).expect("report serializes");
        v.push(b'\n');
        v
    }
}

/// What an experiment hands back before it is wrapped into a `Report`.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub checks: Vec<Check>,
    pub bounds: Vec<LabeledBound>,
    pub diagnostics: BTreeMap<String, Value>,
    pub series: crate::io::Series,
}

impl Outcome {
    pub fn new(series: crate::io::Series) -> Self {
        Self {
            series,
            ..Self::default()
        }
    }

    pub fn check(&mut self, c: Check) {
        self.checks.push(c);
    }

    pub fn bound(&mut self, label: impl Into<String>, report: BoundReport) {
        self.bounds.push(LabeledBound {
            label: label.into(),
            report,
        });
    }

    pub fn diag(&mut self, key: &str, value: impl Serialize) {
        self.diagnostics.insert(
            key.to_string(),
            serde_json::to_value(value).unwrap_or(Value::Null),
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relations() {
        assert!(Check::le("a", 1.0, 0.9, 0.2).pass);
        assert!(!Check::le("a", 1.0, 0.9, 0.05).pass);
        assert!(Check::ge("a", 0.7, 0.75, 0.05).pass);
        assert!(!Check::ge("a", 0.69, 0.75, 0.05).pass);
        let c = Check::close("a", 1.0, 1.0 + 1e-13, 1e-12);
        assert!(c.pass && c.margin > 0.0);
        assert!(!Check::le("nan", f64::NAN, 1.0, 0.0).pass);
        assert!(Check::le("inf", 5.0, f64::INFINITY, 0.0).pass);
    }

    #[test]
    fn infinite_values_serialize_as_null() {
        let c = Check::le("inf", 5.0, f64::INFINITY, 0.0);
        let v = serde_json::to_value(&c).unwrap();
        assert!(v["bound"].is_null());
        assert_eq!(v["measured"], 5.0);
    }
}
