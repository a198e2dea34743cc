use std::collections::BTreeMap;
use std::path::PathBuf;
use std::thread;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::controller::RuntimeConfig;
use crate::llm::{
    build_correction_prompt, build_specification_prompt, default_task, extract_code, Gateway, ModelConfig,
    PromptBundle, PromptError, DEFAULT_CONTEXT,
};
use crate::oracle::OracleConfig;
use crate::scenario::{build_test_case, Mode, ScenarioError, ScenarioSpec, ACC_CASES, CAEM_CASES};
use crate::sim::{write_trace_csv, DEFAULT_DT};

use super::evaluation::{evaluate_candidate, CandidateEvaluation};
use super::{
    candidate_id, classify_regression, compare_to_baseline, BaselineRecord, BaselineState, CandidateVersion, Origin,
};

fn default_initiations() -> usize {
    13
}
fn default_depth() -> usize {
    1
}
fn default_true() -> bool {
    true
}
fn default_dt() -> f64 {
    DEFAULT_DT
}
fn default_workers() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    #[serde(default = "default_initiations")]
    pub initiations_max: usize,
    /// Corrections chained after each initial version.
    #[serde(default = "default_depth")]
    pub correction_depth: usize,
    #[serde(default = "default_true")]
    pub stop_on_gold: bool,
    pub mode: Mode,
    /// Catalog ids; empty means the whole catalog for `mode`.
    #[serde(default)]
    pub test_cases: Vec<String>,
    pub model: ModelConfig,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default)]
    pub runtime: RuntimeConfig,
    #[serde(default)]
    pub oracle: OracleConfig,
    #[serde(default = "default_true")]
    pub parallel_cases: bool,
    /// Initiations run concurrently; 1 keeps the run strictly sequential.
    #[serde(default = "default_workers")]
    pub parallel_initiations: usize,
    #[serde(default)]
    pub context_file: Option<PathBuf>,
    #[serde(default)]
    pub task_file: Option<PathBuf>,
}

impl PipelineConfig {
    pub fn new(mode: Mode, model: ModelConfig) -> Self {
        PipelineConfig {
            initiations_max: default_initiations(),
            correction_depth: default_depth(),
            stop_on_gold: true,
            mode,
            test_cases: vec![],
            model,
            dt: DEFAULT_DT,
            runtime: RuntimeConfig::Builtin,
            oracle: OracleConfig::default(),
            parallel_cases: true,
            parallel_initiations: 1,
            context_file: None,
            task_file: None,
        }
    }

    pub fn case_ids(&self) -> Vec<String> {
        if !self.test_cases.is_empty() {
            return self.test_cases.clone();
        }
        let ids: &[&str] = match self.mode {
            Mode::Caem => &CAEM_CASES,
            Mode::Acc => &ACC_CASES,
        };
        ids.iter().map(|s| s.to_string()).collect()
    }

    pub fn scenarios(&self) -> Result<Vec<ScenarioSpec<f64>>, PipelineError> {
        self.case_ids().iter().map(|id| build_test_case(id).map_err(PipelineError::from)).collect()
    }

    fn texts(&self) -> Result<(String, String), PipelineError> {
        let read = |path: &Option<PathBuf>, fallback: &str| match path {
            Some(p) => std::fs::read_to_string(p).map_err(|e| PipelineError::Io(format!("{}: {e}", p.display()))),
            None => Ok(fallback.to_string()),
        };
        Ok((read(&self.context_file, DEFAULT_CONTEXT)?, read(&self.task_file, default_task(self.mode))?))
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.initiations_max == 0 {
            return Err(PipelineError::Config("initiations_max must be at least 1".into()));
        }
        if self.parallel_initiations == 0 {
            return Err(PipelineError::Config("parallel_initiations must be at least 1".into()));
        }
        if !(self.dt > 0.0) {
            return Err(PipelineError::Config("dt must be positive".into()));
        }
        self.model.validate().map_err(|e| PipelineError::Config(e.to_string()))
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("{0}")]
    Io(String),
    #[error("invalid pipeline configuration: {0}")]
    Config(String),
    #[error("scenario {tc_id} runs in {found} mode, the pipeline is configured for {expected}")]
    ModeMismatch { tc_id: String, expected: &'static str, found: &'static str },
}

/// Everything one run produced, in generation order.
#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub candidates: Vec<CandidateVersion>,
    pub baseline_history: Vec<BaselineRecord>,
    pub baseline: BaselineState,
    pub initiations_started: usize,
}

struct Shared<'a> {
    config: &'a PipelineConfig,
    specs: &'a [ScenarioSpec<f64>],
    context: String,
    task: String,
    gateway: &'a dyn Gateway,
}

/// A candidate before it has a global number.
struct Draft {
    origin_parent: Option<usize>,
    bundle: PromptBundle,
    reply: Option<String>,
    gateway_error: Option<String>,
    source: String,
    evaluation: CandidateEvaluation,
}

impl Shared<'_> {
    fn draft(&self, bundle: PromptBundle, origin_parent: Option<usize>) -> Draft {
        let (reply, gateway_error) = match self.gateway.complete(&bundle) {
            Ok(reply) => (Some(reply), None),
            Err(err) => {
                log::warn!("model request failed: {err}");
                (None, Some(err.to_string()))
            }
        };
        let source = reply.as_deref().and_then(extract_code).unwrap_or_default();
        let code = Some(source.as_str()).filter(|s| !s.trim().is_empty());
        let c = self.config;
        let evaluation = evaluate_candidate(code, self.specs, &c.runtime, c.dt, &c.oracle, c.parallel_cases);
        Draft { origin_parent, bundle, reply, gateway_error, source, evaluation }
    }

    /// One initiation: the initial version followed by its correction chain.
    /// Stops early once a version is gold, since nothing is left to correct.
    fn initiation(&self) -> Result<Vec<Draft>, PipelineError> {
        let first = self.draft(build_specification_prompt(&self.context, &self.task)?, None);
        let mut drafts = vec![first];
        for _ in 0..self.config.correction_depth {
            let last = drafts.last().expect("initial draft");
            if last.source.trim().is_empty() || is_gold(&last.evaluation) {
                break;
            }
            let scenarios: Vec<(String, String)> =
                self.specs.iter().map(|s| (s.id.clone(), s.description.clone())).collect();
            // the report text carries no candidate id, so the placeholder never reaches the prompt
            let report = last.evaluation.report("");
            let bundle = build_correction_prompt(&self.context, &scenarios, &last.source, &report, &self.task)?;
            let parent = drafts.len() - 1;
            drafts.push(self.draft(bundle, Some(parent)));
        }
        Ok(drafts)
    }
}

fn is_gold(evaluation: &CandidateEvaluation) -> bool {
    let report = evaluation.report("");
    report.is_executable() && report.summary.passed_count == report.summary.total && report.summary.total > 0
}

fn digest(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

fn finalize(draft: Draft, number: usize, initiation: usize, first_of_initiation: usize) -> CandidateVersion {
    let id = candidate_id(number);
    let origin = match draft.origin_parent {
        None => Origin::Initial { initiation },
        Some(p) => Origin::Correction { initiation, parent: candidate_id(first_of_initiation + p) },
    };
    let report = draft.evaluation.report(&id);
    let trace_digests: BTreeMap<String, String> =
        draft.evaluation.traces.iter().map(|t| (t.scenario_id.clone(), digest(&write_trace_csv(t)))).collect();
    CandidateVersion {
        id,
        origin,
        source: draft.source,
        prompt: draft.bundle.rendered,
        reply: draft.reply,
        gateway_error: draft.gateway_error,
        statuses: draft.evaluation.statuses(),
        passed: report.summary.passed_count,
        total: report.summary.total,
        report,
        regression: None,
        trace_digests,
        traces: draft.evaluation.traces,
    }
}

pub fn run_pipeline(config: &PipelineConfig, gateway: &dyn Gateway) -> Result<PipelineRun, PipelineError> {
    let specs = config.scenarios()?;
    run_pipeline_on(config, &specs, gateway)
}

/// Runs the loop on explicit scenarios. Candidates are numbered across initiations in generation order.
pub fn run_pipeline_on(
    config: &PipelineConfig,
    specs: &[ScenarioSpec<f64>],
    gateway: &dyn Gateway,
) -> Result<PipelineRun, PipelineError> {
    config.validate()?;
    for spec in specs {
        spec.validate()?;
        if spec.mode != config.mode {
            return Err(PipelineError::ModeMismatch {
                tc_id: spec.id.clone(),
                expected: config.mode.as_str(),
                found: spec.mode.as_str(),
            });
        }
    }
    let (context, task) = config.texts()?;
    let shared = Shared { config, specs, context, task, gateway };

    let mut run = PipelineRun {
        candidates: vec![],
        baseline_history: vec![],
        baseline: BaselineState::default(),
        initiations_started: 0,
    };
    let mut next_initiation = 1;
    'outer: while next_initiation <= config.initiations_max {
        let batch = config.parallel_initiations.min(config.initiations_max - next_initiation + 1);
        let results: Vec<Result<Vec<Draft>, PipelineError>> = if batch == 1 {
            vec![shared.initiation()]
        } else {
            thread::scope(|scope| {
                let handles: Vec<_> = (0..batch).map(|_| scope.spawn(|| shared.initiation())).collect();
                handles.into_iter().map(|h| h.join().expect("initiation worker panicked")).collect()
            })
        };
        for drafts in results {
            let drafts = drafts?;
            let initiation = next_initiation;
            next_initiation += 1;
            run.initiations_started = initiation;
            let first = run.candidates.len() + 1;
            for draft in drafts {
                let mut candidate = finalize(draft, run.candidates.len() + 1, initiation, first);
                if let Some(parent) = candidate.origin.parent() {
                    let parent = &run.candidates[crate::orchestrator::candidate_number(parent) - 1];
                    candidate.regression = Some(classify_regression(parent, &candidate));
                }
                let next = compare_to_baseline(&candidate, &run.baseline);
                if next != run.baseline {
                    run.baseline_history.push(BaselineRecord {
                        candidate: candidate.id.clone(),
                        passed: next.passed,
                        gold: next.gold,
                    });
                    run.baseline = next;
                }
                log::info!("{}: passed {} of {}", candidate.id, candidate.passed, candidate.total);
                let gold = candidate.is_gold();
                run.candidates.push(candidate);
                if gold && config.stop_on_gold {
                    break 'outer;
                }
            }
        }
    }
    Ok(run)
}
