//! The generate, simulate, report, correct loop with best-so-far baseline selection.

mod evaluation;
mod pipeline;

pub use evaluation::{evaluate_candidate, CandidateEvaluation};
pub use pipeline::{run_pipeline, run_pipeline_on, PipelineConfig, PipelineError, PipelineRun};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::controller::ExecutabilityStatus;
use crate::report::TestReport;
use crate::sim::SimTrace;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Origin {
    /// First version of initiation `initiation` (1-based), built without feedback.
    Initial {
        initiation: usize,
    },
    Correction {
        initiation: usize,
        parent: String,
    },
}

impl Origin {
    pub fn initiation(&self) -> usize {
        match self {
            Origin::Initial { initiation } | Origin::Correction { initiation, .. } => *initiation,
        }
    }

    pub fn parent(&self) -> Option<&str> {
        match self {
            Origin::Initial { .. } => None,
            Origin::Correction { parent, .. } => Some(parent),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseStatus {
    pub tc_id: String,
    pub status: ExecutabilityStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "class", content = "delta")]
pub enum RegressionClass {
    Improved(usize),
    Unchanged,
    Regressed(usize),
    NonExecutable,
}

/// One generated controller and everything learned about it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateVersion {
    /// `C1`, `C2`, ... numbered across the whole run.
    pub id: String,
    pub origin: Origin,
    /// Extracted controller source; empty when the reply held no code.
    pub source: String,
    pub prompt: String,
    pub reply: Option<String>,
    pub gateway_error: Option<String>,
    pub statuses: Vec<CaseStatus>,
    pub report: TestReport,
    /// Passed test cases, counting executable ones only.
    pub passed: usize,
    pub total: usize,
    pub regression: Option<RegressionClass>,
    /// SHA-256 of each exported trace CSV.
    pub trace_digests: BTreeMap<String, String>,
    #[serde(skip)]
    pub traces: Vec<SimTrace<f64>>,
}

impl CandidateVersion {
    /// Ne: at least one test case could not be run.
    pub fn is_executable(&self) -> bool {
        self.statuses.iter().all(|c| c.status.is_executable())
    }

    pub fn is_gold(&self) -> bool {
        self.is_executable() && self.total > 0 && self.passed == self.total
    }

    pub fn number(&self) -> usize {
        candidate_number(&self.id)
    }
}

pub fn candidate_id(number: usize) -> String {
    format!("C{number}")
}

pub fn candidate_number(id: &str) -> usize {
    id.trim_start_matches('C').parse().unwrap_or(0)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BaselineRecord {
    /// Candidate whose evaluation triggered the promotion.
    pub candidate: String,
    pub passed: usize,
    pub gold: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BaselineState {
    pub current: Option<String>,
    pub passed: usize,
    pub gold: bool,
}

/// Best-so-far selection on P. Ne candidates never become the baseline; ties keep the incumbent.
pub fn compare_to_baseline(candidate: &CandidateVersion, baseline: &BaselineState) -> BaselineState {
    if !candidate.is_executable() {
        return baseline.clone();
    }
    if baseline.current.is_none() || candidate.passed > baseline.passed {
        BaselineState { current: Some(candidate.id.clone()), passed: candidate.passed, gold: candidate.is_gold() }
    } else {
        baseline.clone()
    }
}

pub fn classify_regression(parent: &CandidateVersion, child: &CandidateVersion) -> RegressionClass {
    if !child.is_executable() {
        return RegressionClass::NonExecutable;
    }
    match child.passed.cmp(&parent.passed) {
        std::cmp::Ordering::Greater => RegressionClass::Improved(child.passed - parent.passed),
        std::cmp::Ordering::Equal => RegressionClass::Unchanged,
        std::cmp::Ordering::Less => RegressionClass::Regressed(parent.passed - child.passed),
    }
}
