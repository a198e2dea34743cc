use std::collections::HashMap;

use serde::Serialize;
use thiserror::Error;

use crate::orchestrator::{CandidateVersion, Origin};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StatsError {
    #[error("the ledger holds no candidates")]
    Empty,
    #[error("candidate {child} names unknown parent {parent}")]
    MissingParent { child: String, parent: String },
    #[error("candidates disagree on the number of test cases ({0} vs {1})")]
    MixedTotals(usize, usize),
}

/// Aggregates over a run. Rates are fractions in [0, 1] and read 0 when nothing was attempted;
/// the ΔP means are `None` without any executable pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunStats {
    pub total_tcs: usize,
    pub total_candidates: usize,
    pub initial_versions: usize,
    pub corrections: usize,
    pub non_executable: usize,
    /// Candidates that ran on every test case.
    pub compilable_count: usize,
    pub successful_initial: usize,
    pub success_rate_initial: f64,
    /// Corrections whose parent ran on every test case.
    pub corrections_of_executable: usize,
    pub successful_corrected: usize,
    pub success_rate_correction: f64,
    /// Parent and child both executable; the ΔP values below come from these.
    pub executable_pairs: usize,
    pub improving_pairs: usize,
    pub unchanged_pairs: usize,
    pub regressed_pairs: usize,
    /// Mean ΔP divided by the number of test cases.
    pub mean_delta_p_all: Option<f64>,
    pub mean_delta_p_improving: Option<f64>,
    pub mean_delta_p_raw_all: Option<f64>,
    pub mean_delta_p_raw_improving: Option<f64>,
}

fn ratio(num: f64, den: usize) -> Option<f64> {
    (den > 0).then(|| num / den as f64)
}

pub fn compute_stats(candidates: &[CandidateVersion]) -> Result<RunStats, StatsError> {
    let first = candidates.first().ok_or(StatsError::Empty)?;
    let total = first.total;
    if let Some(c) = candidates.iter().find(|c| c.total != total) {
        return Err(StatsError::MixedTotals(total, c.total));
    }
    let by_id: HashMap<&str, &CandidateVersion> = candidates.iter().map(|c| (c.id.as_str(), c)).collect();

    let initials: Vec<_> = candidates.iter().filter(|c| matches!(c.origin, Origin::Initial { .. })).collect();
    let successful_initial = initials.iter().filter(|c| c.is_gold()).count();

    let mut corrections = 0;
    let mut corrections_of_executable = 0;
    let mut successful_corrected = 0;
    let mut deltas: Vec<i64> = Vec::new();
    for child in candidates {
        let Some(parent_id) = child.origin.parent() else { continue };
        let parent = by_id
            .get(parent_id)
            .ok_or_else(|| StatsError::MissingParent { child: child.id.clone(), parent: parent_id.to_string() })?;
        corrections += 1;
        if !parent.is_executable() {
            continue;
        }
        corrections_of_executable += 1;
        if child.is_gold() {
            successful_corrected += 1;
        }
        if child.is_executable() {
            deltas.push(child.passed as i64 - parent.passed as i64);
        }
    }

    let improving: Vec<i64> = deltas.iter().copied().filter(|d| *d > 0).collect();
    let sum_all: i64 = deltas.iter().sum();
    let sum_improving: i64 = improving.iter().sum();
    let norm = |v: Option<f64>| v.and_then(|m| (total > 0).then(|| m / total as f64));
    let raw_all = ratio(sum_all as f64, deltas.len());
    let raw_improving = ratio(sum_improving as f64, improving.len());

    Ok(RunStats {
        total_tcs: total,
        total_candidates: candidates.len(),
        initial_versions: initials.len(),
        corrections,
        non_executable: candidates.iter().filter(|c| !c.is_executable()).count(),
        compilable_count: candidates.iter().filter(|c| c.is_executable()).count(),
        successful_initial,
        success_rate_initial: ratio(successful_initial as f64, initials.len()).unwrap_or(0.0),
        corrections_of_executable,
        successful_corrected,
        success_rate_correction: ratio(successful_corrected as f64, corrections_of_executable).unwrap_or(0.0),
        executable_pairs: deltas.len(),
        improving_pairs: improving.len(),
        unchanged_pairs: deltas.iter().filter(|d| **d == 0).count(),
        regressed_pairs: deltas.iter().filter(|d| **d < 0).count(),
        mean_delta_p_all: norm(raw_all),
        mean_delta_p_improving: norm(raw_improving),
        mean_delta_p_raw_all: raw_all,
        mean_delta_p_raw_improving: raw_improving,
    })
}

/// `0.0918` at one decimal becomes `9.2%`; absent values print as `n/a`.
pub fn format_percent(value: Option<f64>, decimals: usize) -> String {
    match value {
        Some(v) => format!("{}%", crate::report::format_fixed(v * 100.0, decimals)),
        None => "n/a".into(),
    }
}

impl RunStats {
    pub fn to_text(&self) -> String {
        let raw = |v: Option<f64>| v.map_or("n/a".to_string(), |v| crate::report::format_fixed(v, 2));
        let mut out = String::new();
        out.push_str(&format!(
            "Candidates: {} ({} initial, {} corrections, {} not executable)\n",
            self.total_candidates, self.initial_versions, self.corrections, self.non_executable
        ));
        out.push_str(&format!(
            "Initial success rate: {} ({} of {})\n",
            format_percent(Some(self.success_rate_initial), 1),
            self.successful_initial,
            self.initial_versions
        ));
        out.push_str(&format!(
            "Correction success rate: {} ({} of {})\n",
            format_percent(Some(self.success_rate_correction), 1),
            self.successful_corrected,
            self.corrections_of_executable
        ));
        out.push_str(&format!(
            "Mean improvement over all executable corrections: {} ({} test cases over {} pairs)\n",
            format_percent(self.mean_delta_p_all, 1),
            raw(self.mean_delta_p_raw_all),
            self.executable_pairs
        ));
        out.push_str(&format!(
            "Mean improvement over improving corrections: {} ({} test cases over {} pairs)\n",
            format_percent(self.mean_delta_p_improving, 1),
            raw(self.mean_delta_p_raw_improving),
            self.improving_pairs
        ));
        out
    }
}
