use std::collections::BTreeMap;

use serde::Serialize;
use stiefel_laplace::laplace::Diagnostics;
use stiefel_laplace::verify::{CaseError, CaseInputs, CaseResult, Metric};

pub const SCHEMA_VERSION: &str = "1.0";

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub schema_version: &'static str,
    pub command: &'static str,
    pub versions: Versions,
    pub seed: Option<u64>,
    pub cases: Vec<ReportCase>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub discrepancies: Vec<Discrepancy>,
    pub summary: Summary,
    /// Excluded from the determinism guarantee.
    pub timings: Timings,
}

#[derive(Clone, Debug, Serialize)]
pub struct Versions {
    pub stlap: &'static str,
    pub stiefel_laplace: &'static str,
}

impl Default for Versions {
    fn default() -> Self {
        Self {
            stlap: env!("CARGO_PKG_VERSION"),
            stiefel_laplace: env!("CARGO_PKG_VERSION"),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Summary {
    pub passed: usize,
    pub failed: usize,
    pub skipped: usize,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Timings {
    pub total_seconds: f64,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub cases: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CaseDiagnostics {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub det_u1: Option<f64>,
    pub orthonormality_residual: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dense_block_gap: Option<f64>,
}

impl From<&Diagnostics> for CaseDiagnostics {
    fn from(d: &Diagnostics) -> Self {
        Self {
            det_u1: d.det_u1,
            orthonormality_residual: d.orthonormality_residual,
            dense_block_gap: d.dense_block_gap,
        }
    }
}

/// One row of a report. `pass` is `None` when the case makes no claim
/// (plain evaluations, skipped methods, diffusion runs with M = 1).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReportCase {
    pub id: String,
    pub inputs: CaseInputs,
    pub method: String,
    pub value: Option<f64>,
    pub target: Option<f64>,
    pub abs_err: Option<f64>,
    pub rel_err: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metric: Option<Metric>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    pub pass: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub std_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<CaseDiagnostics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<CaseError>,
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

impl ReportCase {
    pub fn evaluation(id: String, inputs: CaseInputs, method: &str, value: f64) -> Self {
        Self {
            id,
            inputs,
            method: method.into(),
            value: finite(value),
            target: None,
            abs_err: None,
            rel_err: None,
            metric: None,
            tolerance: None,
            pass: None,
            std_error: None,
            diagnostics: None,
            note: None,
            error: None,
        }
    }

    pub fn skipped(id: String, inputs: CaseInputs, method: &str, note: String) -> Self {
        Self {
            note: Some(note),
            ..Self::evaluation(id, inputs, method, f64::NAN)
        }
    }
}

impl From<CaseResult> for ReportCase {
    fn from(r: CaseResult) -> Self {
        Self {
            id: r.id,
            inputs: r.inputs,
            method: r.method,
            value: finite(r.value),
            target: finite(r.target),
            abs_err: finite(r.abs_err),
            rel_err: finite(r.rel_err),
            metric: r.error.is_none().then_some(r.metric),
            tolerance: finite(r.tolerance),
            pass: Some(r.pass),
            std_error: r.std_error,
            diagnostics: None,
            note: None,
            error: r.error,
        }
    }
}

/// Pairwise agreement between two methods at one point.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Discrepancy {
    pub point: String,
    pub methods: [String; 2],
    pub abs_err: f64,
    pub rel_err: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Report {
    pub fn new(
        command: &'static str,
        seed: Option<u64>,
        cases: Vec<ReportCase>,
        discrepancies: Vec<Discrepancy>,
    ) -> Self {
        let mut summary = Summary::default();
        // Plain evaluations make no claim and are not counted.
        let claims = cases
            .iter()
            .map(|c| (c.pass, c.note.is_some()))
            .chain(discrepancies.iter().map(|d| (Some(d.pass), false)));
        for claim in claims {
            match claim {
                (Some(true), _) => summary.passed += 1,
                (Some(false), _) => summary.failed += 1,
                (None, true) => summary.skipped += 1,
                (None, false) => {}
            }
        }
        Self {
            schema_version: SCHEMA_VERSION,
            command,
            versions: Versions::default(),
            seed,
            cases,
            discrepancies,
            summary,
            timings: Timings::default(),
        }
    }

    /// Any failed case carries a degeneracy error.
    pub fn has_degeneracy(&self) -> bool {
        self.cases
            .iter()
            .any(|c| c.error.as_ref().is_some_and(|e| e.degenerate))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is serializable")
    }
}
