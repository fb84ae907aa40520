//! JSON reports: checks with residual and tolerance, convention flags,
//! tolerance table, and a metadata field that holds everything that may
//! differ between runs (wall-clock times).

use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::Value;

use crate::calderon::TraceConvention;
use crate::disc::model::MODE_ZERO_CUT;
use crate::error::{Error, Result};

pub const TOOL: &str = "calderon-lab";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Convention flags carried by every report. None of them has a default:
/// the caller states the trace coordinates it used.
#[derive(Debug, Clone, Serialize)]
pub struct ConventionFlags {
    /// coordinates of the stored trace jets
    pub trace_coordinates: &'static str,
    /// coordinates used when comparing against closed-form matrices
    pub comparison_coordinates: &'static str,
    pub normal_variable: &'static str,
    pub mode_zero_cut: f64,
    pub mode_zero_calderon: &'static str,
    pub exterior_complement: &'static str,
    pub boundary_condition: &'static str,
}

impl ConventionFlags {
    pub fn new(trace: TraceConvention, comparison: TraceConvention) -> Self {
        ConventionFlags {
            trace_coordinates: trace.name(),
            comparison_coordinates: comparison.name(),
            normal_variable: "t = x_n inward (disc: x_n = 1 - r)",
            mode_zero_cut: MODE_ZERO_CUT,
            mode_zero_calderon: "identity",
            exterior_complement: "riemann_sphere",
            boundary_condition: "B = ker P",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    AtMost,
    AtLeast,
    Equal,
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub relation: Relation,
    pub pass: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Check {
            name: name.into(),
            pass: value <= tolerance,
            value,
            tolerance,
            relation: Relation::AtMost,
        }
    }

    pub fn at_least(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Check {
            name: name.into(),
            pass: value >= tolerance,
            value,
            tolerance,
            relation: Relation::AtLeast,
        }
    }

    pub fn equal(name: impl Into<String>, value: f64, expected: f64) -> Self {
        Check {
            name: name.into(),
            pass: value == expected,
            value,
            tolerance: expected,
            relation: Relation::Equal,
        }
    }

    /// A boolean outcome, recorded as 1 (true) against an expected 1.
    pub fn holds(name: impl Into<String>, ok: bool) -> Self {
        Check::equal(name, if ok { 1.0 } else { 0.0 }, 1.0)
    }
}

/// Named tolerances with defaults; `--tol-override key=value` edits them.
#[derive(Debug, Clone, Serialize)]
pub struct Tolerances(BTreeMap<String, f64>);

impl Default for Tolerances {
    fn default() -> Self {
        let t = [
            ("cross_method", 1e-8),
            ("closed_form", 1e-9),
            ("duality", 1e-8),
            ("sl", crate::lopatinskii::SL_TOL),
            ("chi_plus", 1e-10),
            ("case_study_relative", 1e-3),
            ("case_study_flat", 1e-3),
            ("compactness_factor", 0.8),
            ("graph", crate::disc::subspace::GRAPH_TOL),
            ("weyl_quadrature", 1e-6),
            ("weyl_median", 0.02),
            ("weyl_interval", 0.005),
            ("singular_value_fit", 0.05),
            ("poincare_stability", 0.02),
            ("poincare_match", 0.01),
        ];
        Tolerances(t.iter().map(|(k, v)| (k.to_string(), *v)).collect())
    }
}

impl Tolerances {
    pub fn get(&self, key: &str) -> f64 {
        self.0[key]
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.0.keys().map(String::as_str)
    }

    /// Applies `key=value`; unknown keys are rejected.
    pub fn apply(&mut self, spec: &str) -> Result<()> {
        let (k, v) = spec
            .split_once('=')
            .ok_or_else(|| Error::InvalidInput(format!("tolerance override `{spec}` must be key=value")))?;
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|_| Error::InvalidInput(format!("tolerance `{k}` needs a number, got `{v}`")))?;
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::InvalidInput(format!("tolerance `{k}` must be finite and non-negative")));
        }
        match self.0.get_mut(k.trim()) {
            Some(slot) => {
                *slot = v;
                Ok(())
            }
            None => Err(Error::InvalidInput(format!(
                "unknown tolerance `{k}` (known: {})",
                self.keys().collect::<Vec<_>>().join(", ")
            ))),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Metadata {
    pub runtime_seconds: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub conventions: ConventionFlags,
    pub tolerances: Tolerances,
    pub pass: bool,
    pub checks: Vec<Check>,
    pub results: Value,
    pub metadata: Metadata,
}

impl Report {
    pub fn new(command: impl Into<String>, conventions: ConventionFlags, tolerances: &Tolerances) -> Self {
        Report {
            tool: TOOL,
            version: VERSION,
            command: command.into(),
            seed: None,
            conventions,
            tolerances: tolerances.clone(),
            pass: true,
            checks: Vec::new(),
            results: Value::Null,
            metadata: Metadata::default(),
        }
    }

    pub fn push(&mut self, check: Check) {
        self.pass &= check.pass;
        self.checks.push(check);
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    /// The report without its metadata: identical across runs with the same
    /// inputs.
    pub fn deterministic_json(&self) -> String {
        let mut v = serde_json::to_value(self).expect("report serializes");
        if let Value::Object(m) = &mut v {
            m.remove("metadata");
        }
        serde_json::to_string_pretty(&v).expect("report serializes") + "\n"
    }

    pub fn write(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }
}
