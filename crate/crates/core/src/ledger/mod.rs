//! On-disk record of a run, aggregate statistics and trace replay.

mod stats;

pub use stats::{compute_stats, format_percent, RunStats, StatsError};

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::controller::{ExecutabilityStatus, RuntimeConfig};
use crate::oracle::{compute_headway, compute_ttc, evaluate_with, lead_vehicle, EvaluationError, OracleConfig};
use crate::orchestrator::{
    evaluate_candidate, BaselineRecord, BaselineState, CandidateVersion, PipelineConfig, PipelineRun, RegressionClass,
};
use crate::report::{render_report, CaseOutcome, CaseSection};
use crate::scenario::{parse_scenario, serialize_scenario, ScenarioSpec};
use crate::sim::{read_events_jsonl, read_trace_csv, write_events_jsonl, write_trace_csv, SimTrace, TraceIoError};

#[derive(Debug, Error)]
pub enum LedgerError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{path}: {source}")]
    Trace { path: PathBuf, source: TraceIoError },
    #[error("no candidate {0} in the ledger")]
    UnknownCandidate(String),
    #[error("ledger is inconsistent: {0}")]
    Inconsistent(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSummary {
    pub initiations: usize,
    pub candidates: usize,
    pub baseline: Option<String>,
    pub baseline_passed: usize,
    pub total: usize,
    pub gold: bool,
    pub non_executable: Vec<String>,
    /// Corrections that could not be run at all.
    pub flagged_regressions: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct RunLedger {
    pub config: PipelineConfig,
    pub scenarios: Vec<ScenarioSpec<f64>>,
    pub candidates: Vec<CandidateVersion>,
    pub baseline_history: Vec<BaselineRecord>,
    pub summary: RunSummary,
}

impl RunLedger {
    pub fn from_run(config: PipelineConfig, scenarios: Vec<ScenarioSpec<f64>>, run: PipelineRun) -> Self {
        let summary = summarize(run.initiations_started, &run.candidates, &run.baseline);
        RunLedger { config, scenarios, candidates: run.candidates, baseline_history: run.baseline_history, summary }
    }

    pub fn candidate(&self, id: &str) -> Result<&CandidateVersion, LedgerError> {
        self.candidates.iter().find(|c| c.id == id).ok_or_else(|| LedgerError::UnknownCandidate(id.to_string()))
    }

    pub fn baseline(&self) -> Option<&CandidateVersion> {
        self.summary.baseline.as_deref().and_then(|id| self.candidate(id).ok())
    }
}

fn summarize(initiations: usize, candidates: &[CandidateVersion], baseline: &BaselineState) -> RunSummary {
    RunSummary {
        initiations,
        candidates: candidates.len(),
        baseline: baseline.current.clone(),
        baseline_passed: baseline.passed,
        total: candidates.first().map_or(0, |c| c.total),
        gold: baseline.gold,
        non_executable: candidates.iter().filter(|c| !c.is_executable()).map(|c| c.id.clone()).collect(),
        flagged_regressions: candidates
            .iter()
            .filter(|c| c.regression == Some(RegressionClass::NonExecutable))
            .map(|c| c.id.clone())
            .collect(),
    }
}

fn write(path: PathBuf, text: &str) -> Result<(), LedgerError> {
    fs::write(&path, text).map_err(|source| LedgerError::Io { path, source })
}

fn read(path: PathBuf) -> Result<String, LedgerError> {
    fs::read_to_string(&path).map_err(|source| LedgerError::Io { path, source })
}

fn mkdir(path: &Path) -> Result<(), LedgerError> {
    fs::create_dir_all(path).map_err(|source| LedgerError::Io { path: path.to_path_buf(), source })
}

fn pretty<S: Serialize>(value: &S) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("ledger types serialize");
    text.push('\n');
    text
}

fn parse<D: for<'de> Deserialize<'de>>(path: PathBuf) -> Result<D, LedgerError> {
    let text = read(path.clone())?;
    serde_json::from_str(&text).map_err(|source| LedgerError::Json { path, source })
}

pub fn candidate_dir(root: &Path, id: &str) -> PathBuf {
    root.join("candidates").join(id)
}

/// Writes the ledger. Nothing time-dependent is stored, so equal runs give byte-identical trees.
pub fn save_ledger(ledger: &RunLedger, root: &Path) -> Result<(), LedgerError> {
    mkdir(root)?;
    write(root.join("config.json"), &pretty(&ledger.config))?;
    let mut history = String::new();
    for record in &ledger.baseline_history {
        history.push_str(&serde_json::to_string(record).expect("baseline record serializes"));
        history.push('\n');
    }
    write(root.join("baseline.jsonl"), &history)?;
    write(root.join("summary.json"), &pretty(&ledger.summary))?;
    let scenarios = root.join("scenarios");
    mkdir(&scenarios)?;
    let mut index = String::new();
    for spec in &ledger.scenarios {
        write(scenarios.join(format!("{}.scn", spec.id)), &serialize_scenario(spec))?;
        index.push_str(&spec.id);
        index.push('\n');
    }
    write(scenarios.join("index.txt"), &index)?;
    for candidate in &ledger.candidates {
        let dir = candidate_dir(root, &candidate.id);
        let traces = dir.join("traces");
        mkdir(&traces)?;
        write(dir.join("source.ctl"), &candidate.source)?;
        write(dir.join("prompt.txt"), &candidate.prompt)?;
        write(dir.join("reply.txt"), candidate.reply.as_deref().unwrap_or(""))?;
        write(dir.join("report.txt"), &candidate.report.to_text())?;
        write(dir.join("report.json"), &candidate.report.to_json())?;
        write(dir.join("candidate.json"), &pretty(candidate))?;
        for trace in &candidate.traces {
            write(traces.join(format!("{}.csv", trace.scenario_id)), &write_trace_csv(trace))?;
            write(traces.join(format!("{}.events.jsonl", trace.scenario_id)), &write_events_jsonl(&trace.events))?;
        }
    }
    Ok(())
}

/// Loads everything but the traces, which [`load_trace`] reads on demand.
pub fn load_ledger(root: &Path) -> Result<RunLedger, LedgerError> {
    let config: PipelineConfig = parse(root.join("config.json"))?;
    let summary: RunSummary = parse(root.join("summary.json"))?;
    let history_path = root.join("baseline.jsonl");
    let mut baseline_history = Vec::new();
    for line in read(history_path.clone())?.lines().filter(|l| !l.trim().is_empty()) {
        baseline_history.push(
            serde_json::from_str(line).map_err(|source| LedgerError::Json { path: history_path.clone(), source })?,
        );
    }
    let scenario_dir = root.join("scenarios");
    let mut scenarios = Vec::new();
    for id in read(scenario_dir.join("index.txt"))?.lines().filter(|l| !l.trim().is_empty()) {
        let path = scenario_dir.join(format!("{id}.scn"));
        let spec = parse_scenario(&read(path.clone())?)
            .map_err(|e| LedgerError::Inconsistent(format!("{}: {e}", path.display())))?;
        scenarios.push(spec);
    }
    let mut candidates = Vec::with_capacity(summary.candidates);
    for number in 1..=summary.candidates {
        let id = crate::orchestrator::candidate_id(number);
        let candidate: CandidateVersion = parse(candidate_dir(root, &id).join("candidate.json"))?;
        if candidate.id != id {
            return Err(LedgerError::Inconsistent(format!("{id}/candidate.json describes {}", candidate.id)));
        }
        candidates.push(candidate);
    }
    Ok(RunLedger { config, scenarios, candidates, baseline_history, summary })
}

pub fn load_trace(root: &Path, candidate: &str, spec: &ScenarioSpec<f64>) -> Result<SimTrace<f64>, LedgerError> {
    let tc_id = spec.id.as_str();
    let dir = candidate_dir(root, candidate).join("traces");
    let csv_path = dir.join(format!("{tc_id}.csv"));
    let events_path = dir.join(format!("{tc_id}.events.jsonl"));
    let events = read_events_jsonl(&read(events_path.clone())?)
        .map_err(|source| LedgerError::Trace { path: events_path, source })?;
    read_trace_csv(&read(csv_path.clone())?, events, spec)
        .map_err(|source| LedgerError::Trace { path: csv_path, source })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ReplayCase {
    pub tc_id: String,
    pub recorded: Option<String>,
    pub replayed: Option<String>,
}

impl ReplayCase {
    pub fn matches(&self) -> bool {
        self.recorded == self.replayed
    }
}

/// Re-executes a stored candidate and compares trace digests with the recorded ones.
pub fn replay_candidate(
    candidate: &CandidateVersion,
    specs: &[ScenarioSpec<f64>],
    runtime: &RuntimeConfig,
    config: &PipelineConfig,
) -> Vec<ReplayCase> {
    let code = Some(candidate.source.as_str()).filter(|s| !s.trim().is_empty());
    let eval = evaluate_candidate(code, specs, runtime, config.dt, &config.oracle, config.parallel_cases);
    specs
        .iter()
        .map(|spec| ReplayCase {
            tc_id: spec.id.clone(),
            recorded: candidate.trace_digests.get(&spec.id).cloned(),
            replayed: eval
                .traces
                .iter()
                .find(|t| t.scenario_id == spec.id)
                .map(|t| hex::encode(Sha256::digest(write_trace_csv(t).as_bytes()))),
        })
        .collect()
}

/// Re-runs the oracle on a stored trace and renders its report section.
pub fn replay_section(
    trace: &SimTrace<f64>,
    spec: &ScenarioSpec<f64>,
    oracle: &OracleConfig,
) -> Result<CaseSection, EvaluationError> {
    let result = evaluate_with(trace, spec, oracle)?;
    let outcome = CaseOutcome {
        tc_id: spec.id.clone(),
        description: spec.description.clone(),
        status: ExecutabilityStatus::Executable,
        result: Some(result),
    };
    Ok(render_report("", &[outcome]).per_tc.remove(0))
}

/// Per-tick ego metrics; empty cells where no lead vehicle or no closing speed exists.
pub fn metric_table_csv(trace: &SimTrace<f64>) -> String {
    let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let header = ["time", "ego_s", "ego_lat", "ego_speed", "ego_lane", "lead", "gap", "headway", "ttc"];
    writer.write_record(header).expect("in-memory writes cannot fail");
    let opt = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
    for frame in &trace.frames {
        let Some(ego) = frame.ego() else { continue };
        let lead = lead_vehicle(frame);
        writer
            .write_record([
                frame.time.to_string(),
                ego.s.to_string(),
                ego.lat.to_string(),
                ego.speed.to_string(),
                ego.lane.to_string(),
                lead.map_or(String::new(), |(_, l)| l.name.clone()),
                opt(lead.map(|(e, l)| l.rear() - e.s)),
                opt(compute_headway(frame)),
                opt(compute_ttc(frame)),
            ])
            .expect("in-memory writes cannot fail");
    }
    String::from_utf8(writer.into_inner().expect("in-memory flush cannot fail")).expect("csv output is utf-8")
}
