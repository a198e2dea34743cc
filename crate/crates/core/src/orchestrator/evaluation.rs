use std::thread;

use crate::controller::{execute_case, ExecutabilityStatus, RuntimeConfig};
use crate::oracle::{evaluate_with, OracleConfig};
use crate::report::{render_report, CaseOutcome, TestReport};
use crate::scenario::ScenarioSpec;
use crate::sim::SimTrace;

use super::CaseStatus;

#[derive(Debug, Clone)]
pub struct CandidateEvaluation {
    pub outcomes: Vec<CaseOutcome<f64>>,
    pub traces: Vec<SimTrace<f64>>,
}

impl CandidateEvaluation {
    pub fn statuses(&self) -> Vec<CaseStatus> {
        self.outcomes.iter().map(|o| CaseStatus { tc_id: o.tc_id.clone(), status: o.status.clone() }).collect()
    }

    pub fn report(&self, candidate_id: &str) -> TestReport {
        render_report(candidate_id, &self.outcomes)
    }
}

fn run_case(
    code: Option<&str>,
    spec: &ScenarioSpec<f64>,
    runtime: &RuntimeConfig,
    dt: f64,
    oracle: &OracleConfig,
) -> (CaseOutcome<f64>, Option<SimTrace<f64>>) {
    let (status, trace) = match code {
        Some(code) => execute_case(code, runtime, spec, dt),
        None => (ExecutabilityStatus::NoCode, None),
    };
    let result = trace.as_ref().map(|t| {
        // traces come straight from the simulator, so a mismatch here is a harness bug
        evaluate_with(t, spec, oracle).expect("fresh trace matches its scenario")
    });
    let outcome = CaseOutcome { tc_id: spec.id.clone(), description: spec.description.clone(), status, result };
    (outcome, trace)
}

/// Runs a candidate on every scenario, in parallel when asked, keeping scenario order.
pub fn evaluate_candidate(
    code: Option<&str>,
    specs: &[ScenarioSpec<f64>],
    runtime: &RuntimeConfig,
    dt: f64,
    oracle: &OracleConfig,
    parallel: bool,
) -> CandidateEvaluation {
    let code = code.filter(|c| !c.trim().is_empty());
    let runs: Vec<_> = if parallel {
        thread::scope(|scope| {
            let handles: Vec<_> =
                specs.iter().map(|spec| scope.spawn(move || run_case(code, spec, runtime, dt, oracle))).collect();
            handles.into_iter().map(|h| h.join().expect("scenario worker panicked")).collect()
        })
    } else {
        specs.iter().map(|spec| run_case(code, spec, runtime, dt, oracle)).collect()
    };
    let mut outcomes = Vec::with_capacity(runs.len());
    let mut traces = Vec::new();
    for (outcome, trace) in runs {
        outcomes.push(outcome);
        traces.extend(trace);
    }
    CandidateEvaluation { outcomes, traces }
}
