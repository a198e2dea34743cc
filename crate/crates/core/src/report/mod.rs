//! Natural-language test reports built from oracle results.

use serde::{Deserialize, Serialize};

use crate::controller::ExecutabilityStatus;
use crate::oracle::{Requirement, TestCaseResult, Violation};
use crate::scalar::Scalar;
use crate::sim::{EventKind, SimEvent};

/// Fixed-point rendering with ties rounded away from zero.
///
/// The small bias absorbs binary representation error, so 5.05 renders as 5.1.
pub fn format_fixed(value: f64, decimals: usize) -> String {
    if value < 0.0 {
        let body = format_fixed(-value, decimals);
        return if body.chars().all(|c| c == '0' || c == '.') { body } else { format!("-{body}") };
    }
    let scale = 10f64.powi(decimals as i32);
    let scaled = (value * scale + 0.5 + 1e-7).floor() as u64;
    if decimals == 0 {
        return scaled.to_string();
    }
    let unit = 10u64.pow(decimals as u32);
    format!("{}.{:0width$}", scaled / unit, scaled % unit, width = decimals)
}

fn t1<T: Scalar>(time: T) -> String {
    format_fixed(time.as_f64(), 1)
}

fn v2<T: Scalar>(value: T) -> String {
    format_fixed(value.as_f64(), 2)
}

pub fn render_event<T: Scalar>(event: &SimEvent<T>) -> String {
    match event.kind {
        EventKind::Collision => format!(
            "Ego was involved in a collision at time: {} seconds with a speed of {} m/s, colliding with: {}.",
            t1(event.time),
            v2(event.ego_speed_at_event),
            event.object.as_deref().unwrap_or("unknown object"),
        ),
        EventKind::OffRoad => format!("Ego exited the drivable area at time: {} seconds.", t1(event.time)),
        EventKind::LaneChangeCompleted => {
            format!("Ego completed a lane change at time: {} seconds.", t1(event.time))
        }
    }
}

/// One narrative line per violation.
pub fn render_violation<T: Scalar>(violation: &Violation<T>) -> String {
    match (violation.requirement, &violation.event) {
        (Requirement::SR1 | Requirement::SR2, Some(event)) => render_event(event),
        (Requirement::SR3, _) => format!(
            "Ego performed an unintended lane change at time: {} seconds with no imminent collision ahead.",
            t1(violation.time)
        ),
        (Requirement::ExpectedManoeuvreMissing, _) => {
            "Ego did not perform the lane change needed to avoid the hazard.".into()
        }
        (Requirement::TimeGapOutOfBand, _) => match violation.measured {
            Some(gap) => format!(
                "Ego time gap of {} seconds at time: {} seconds is outside the required band.",
                v2(gap),
                t1(violation.time)
            ),
            None => format!("Ego had no vehicle ahead to keep a time gap to at time: {} seconds.", t1(violation.time)),
        },
        (Requirement::SetSpeedNotReached, _) => format!(
            "Ego speed of {} m/s at the end of the test is not within tolerance of the set speed.",
            v2(violation.measured.unwrap_or_else(T::zero))
        ),
        (Requirement::SR1, None) => format!("Ego was involved in a collision at time: {} seconds.", t1(violation.time)),
        (Requirement::SR2, None) => format!("Ego exited the drivable area at time: {} seconds.", t1(violation.time)),
    }
}

/// What happened when a candidate was run on one test case.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseOutcome<T: Scalar> {
    pub tc_id: String,
    pub description: String,
    pub status: ExecutabilityStatus,
    /// Present exactly when the status is executable.
    pub result: Option<TestCaseResult<T>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseSection {
    pub tc_id: String,
    pub description: String,
    pub verdict: String,
    pub narrative: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub passed_count: usize,
    pub total: usize,
    pub non_executable_tcs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestReport {
    pub candidate_id: String,
    pub per_tc: Vec<CaseSection>,
    pub summary: ReportSummary,
}

pub fn summary_line(passed: usize, total: usize) -> String {
    format!("Passed {passed} of {total} test cases.")
}

/// Reads P back out of a rendered report.
pub fn parse_passed_count(text: &str) -> Option<(usize, usize)> {
    text.lines().rev().find_map(|line| {
        let rest = line.strip_prefix("Passed ")?.strip_suffix(" test cases.")?;
        let (passed, total) = rest.split_once(" of ")?;
        Some((passed.parse().ok()?, total.parse().ok()?))
    })
}

pub fn render_report<T: Scalar>(candidate_id: &str, cases: &[CaseOutcome<T>]) -> TestReport {
    let mut passed_count = 0;
    let mut non_executable_tcs = Vec::new();
    let per_tc = cases
        .iter()
        .map(|case| {
            let id = &case.tc_id;
            let (verdict, narrative) = match (&case.status, &case.result) {
                (ExecutabilityStatus::Executable, Some(result)) if result.passed => {
                    passed_count += 1;
                    (format!("Test case {id} passed: all acceptance criteria satisfied."), Vec::new())
                }
                (ExecutabilityStatus::Executable, Some(result)) => {
                    (format!("Test case {id} failed."), result.narrative.clone())
                }
                (ExecutabilityStatus::Executable, None) => {
                    non_executable_tcs.push(id.clone());
                    (format!("Test case {id} not executable: no result was produced."), Vec::new())
                }
                (status, _) => {
                    non_executable_tcs.push(id.clone());
                    (format!("Test case {id} not executable: {}.", status.describe()), Vec::new())
                }
            };
            CaseSection { tc_id: id.clone(), description: case.description.clone(), verdict, narrative }
        })
        .collect();
    TestReport {
        candidate_id: candidate_id.to_string(),
        per_tc,
        summary: ReportSummary { passed_count, total: cases.len(), non_executable_tcs },
    }
}

impl CaseSection {
    /// Header, verdict, narrative and a blank separator line.
    pub fn to_text(&self) -> String {
        let mut out = format!("[{}] {}\n{}\n", self.tc_id, self.description.trim(), self.verdict);
        for line in &self.narrative {
            out.push_str(line);
            out.push('\n');
        }
        out.push('\n');
        out
    }
}

impl TestReport {
    /// Plain-text form, as embedded in correction prompts.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for section in &self.per_tc {
            out.push_str(&section.to_text());
        }
        if !self.summary.non_executable_tcs.is_empty() {
            out.push_str(&format!("Not executable: {}.\n", self.summary.non_executable_tcs.join(", ")));
        }
        out.push_str(&summary_line(self.summary.passed_count, self.summary.total));
        out.push('\n');
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialize") + "\n"
    }

    pub fn is_executable(&self) -> bool {
        self.summary.non_executable_tcs.is_empty()
    }
}
