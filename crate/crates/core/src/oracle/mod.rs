//! Safety requirements checked over finished traces.

mod metrics;

pub use metrics::{compute_headway, compute_ttc, lead_vehicle};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;
use crate::scenario::{ScenarioSpec, EGO_NAME};
use crate::sim::{footprint, EventKind, SimEvent, SimTrace, TraceFrame, LANE_CHANGE_DURATION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Requirement {
    /// Collision with any object.
    SR1,
    /// Leaving the drivable area.
    SR2,
    /// Lane change without an imminent collision ahead.
    SR3,
    ExpectedManoeuvreMissing,
    TimeGapOutOfBand,
    SetSpeedNotReached,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Violation<T: Scalar> {
    pub requirement: Requirement,
    /// The trace event behind the violation; absent for whole-run checks.
    pub event: Option<SimEvent<T>>,
    pub time: T,
    /// Offending value for the numeric checks (time gap or speed).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measured: Option<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Metrics<T: Scalar> {
    pub min_ttc: Option<T>,
    pub min_headway: Option<T>,
    pub lane_change_times: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct TestCaseResult<T: Scalar> {
    pub tc_id: String,
    pub passed: bool,
    pub violations: Vec<Violation<T>>,
    pub narrative: Vec<String>,
    pub metrics: Metrics<T>,
}

/// Thresholds for the imminent-collision test and the ACC end-of-run window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    pub ttc_threshold: f64,
    pub headway_threshold: f64,
    /// How far before a lane-change initiation the imminent-collision test looks.
    pub window: f64,
    /// Final stretch of an ACC run over which the time-gap band applies.
    pub time_gap_window: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig { ttc_threshold: 4.0, headway_threshold: 0.75, window: 3.0, time_gap_window: 3.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvaluationError {
    #[error("trace does not belong to scenario {expected}: {reason}")]
    Mismatch { expected: String, reason: String },
}

pub fn evaluate<T: Scalar>(trace: &SimTrace<T>, spec: &ScenarioSpec<T>) -> Result<TestCaseResult<T>, EvaluationError> {
    evaluate_with(trace, spec, &OracleConfig::default())
}

pub fn evaluate_with<T: Scalar>(
    trace: &SimTrace<T>,
    spec: &ScenarioSpec<T>,
    config: &OracleConfig,
) -> Result<TestCaseResult<T>, EvaluationError> {
    check_consistency(trace, spec)?;
    let mut violations: Vec<Violation<T>> = trace
        .ego_events(EventKind::Collision)
        .map(|e| Violation { requirement: Requirement::SR1, event: Some(e.clone()), time: e.time, measured: None })
        .collect();
    violations.extend(off_road_violations(trace, spec)?);
    violations.extend(detect_unintended_lane_change_with(trace, spec, config));

    let lane_changes: Vec<T> = trace.ego_events(EventKind::LaneChangeCompleted).map(|e| e.time).collect();
    let already_failed = violations.iter().any(|v| matches!(v.requirement, Requirement::SR1 | Requirement::SR2));
    if spec.expected.lane_change_required && lane_changes.is_empty() && already_failed {
        let end = trace.frames.last().map_or(T::zero(), |f| f.time);
        violations.push(Violation {
            requirement: Requirement::ExpectedManoeuvreMissing,
            event: None,
            time: end,
            measured: None,
        });
    }
    violations.extend(acc_violations(trace, spec, config));

    let narrative = violations.iter().map(crate::report::render_violation).collect();
    Ok(TestCaseResult {
        tc_id: spec.id.clone(),
        passed: violations.is_empty(),
        violations,
        narrative,
        metrics: Metrics {
            min_ttc: min_over(trace, compute_ttc),
            min_headway: min_over(trace, compute_headway),
            lane_change_times: lane_changes,
        },
    })
}

fn check_consistency<T: Scalar>(trace: &SimTrace<T>, spec: &ScenarioSpec<T>) -> Result<(), EvaluationError> {
    let mismatch = |reason: String| EvaluationError::Mismatch { expected: spec.id.clone(), reason };
    if trace.scenario_id != spec.id {
        return Err(mismatch(format!("trace is for {}", trace.scenario_id)));
    }
    if trace.frames.is_empty() {
        return Err(mismatch("trace has no frames".into()));
    }
    for frame in &trace.frames {
        if frame.ego().is_none() {
            return Err(mismatch(format!("frame at {} has no ego", frame.time)));
        }
        if let Some(v) = frame.vehicles.iter().find(|v| !v.is_ego() && spec.agent(&v.name).is_none()) {
            return Err(mismatch(format!("unknown vehicle {}", v.name)));
        }
    }
    Ok(())
}

fn ego_off_road<T: Scalar>(frame: &TraceFrame<T>, spec: &ScenarioSpec<T>) -> bool {
    let print = footprint(frame.ego().expect("checked by check_consistency"));
    print.lat_min < T::zero() || print.lat_max > spec.road.drivable_width()
}

/// One violation per excursion, tied to the OffRoad event that opened it.
fn off_road_violations<T: Scalar>(
    trace: &SimTrace<T>,
    spec: &ScenarioSpec<T>,
) -> Result<Vec<Violation<T>>, EvaluationError> {
    let mut out = Vec::new();
    let mut was_off = false;
    for frame in &trace.frames {
        let off = ego_off_road(frame, spec);
        if off && !was_off {
            let event = trace
                .ego_events(EventKind::OffRoad)
                .find(|e| (e.time - frame.time).abs() <= T::time_eps())
                .ok_or_else(|| EvaluationError::Mismatch {
                    expected: spec.id.clone(),
                    reason: format!("ego leaves the road at {} without an OffRoad event", frame.time),
                })?;
            out.push(Violation {
                requirement: Requirement::SR2,
                event: Some(event.clone()),
                time: event.time,
                measured: None,
            });
        }
        was_off = off;
    }
    Ok(out)
}

pub fn detect_unintended_lane_change<T: Scalar>(trace: &SimTrace<T>, spec: &ScenarioSpec<T>) -> Vec<Violation<T>> {
    detect_unintended_lane_change_with(trace, spec, &OracleConfig::default())
}

/// A completed lane change is intended when a lead vehicle posed an imminent
/// collision at its initiation or within the window before it.
pub fn detect_unintended_lane_change_with<T: Scalar>(
    trace: &SimTrace<T>,
    spec: &ScenarioSpec<T>,
    config: &OracleConfig,
) -> Vec<Violation<T>> {
    let ttc_limit = T::of(config.ttc_threshold);
    let headway_limit = T::of(config.headway_threshold);
    let window = T::of(config.window);
    let eps = T::time_eps();
    trace
        .ego_events(EventKind::LaneChangeCompleted)
        .filter(|event| {
            if spec.expected.lane_change_forbidden {
                return true;
            }
            let start = event.started_at.unwrap_or(event.time - T::of(LANE_CHANGE_DURATION));
            let imminent =
                trace.frames.iter().filter(|f| f.time >= start - window - eps && f.time <= start + eps).any(|f| {
                    compute_ttc(f).is_some_and(|ttc| ttc < ttc_limit)
                        || compute_headway(f).is_some_and(|h| h < headway_limit)
                });
            !imminent
        })
        .map(|e| Violation { requirement: Requirement::SR3, event: Some(e.clone()), time: e.time, measured: None })
        .collect()
}

fn acc_violations<T: Scalar>(trace: &SimTrace<T>, spec: &ScenarioSpec<T>, config: &OracleConfig) -> Vec<Violation<T>> {
    let mut out = Vec::new();
    let last = trace.frames.last().expect("checked by check_consistency");
    if let Some((low, high)) = spec.expected.time_gap_band {
        let from = last.time - T::of(config.time_gap_window) - T::time_eps();
        let breach = trace.frames.iter().filter(|f| f.time >= from).find_map(|f| match compute_headway(f) {
            Some(h) if h >= low && h <= high => None,
            measured => Some((f.time, measured)),
        });
        if let Some((time, measured)) = breach {
            out.push(Violation { requirement: Requirement::TimeGapOutOfBand, event: None, time, measured });
        }
    }
    if let (Some(tolerance), Some(set_speed)) = (spec.expected.set_speed_tolerance, spec.set_speed) {
        let speed = last.ego().expect("checked by check_consistency").speed;
        if (speed - set_speed).abs() > tolerance {
            out.push(Violation {
                requirement: Requirement::SetSpeedNotReached,
                event: None,
                time: last.time,
                measured: Some(speed),
            });
        }
    }
    out
}

fn min_over<T: Scalar>(trace: &SimTrace<T>, metric: fn(&TraceFrame<T>) -> Option<T>) -> Option<T> {
    trace.frames.iter().filter_map(metric).reduce(T::min)
}

/// Names of the vehicles the ego collided with, in event order.
pub fn collision_partners<T: Scalar>(result: &TestCaseResult<T>) -> Vec<String> {
    result
        .violations
        .iter()
        .filter(|v| v.requirement == Requirement::SR1)
        .filter_map(|v| v.event.as_ref()?.object.clone())
        .filter(|name| name != EGO_NAME)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controller::IdleController;
    use crate::scenario::build_test_case;
    use crate::sim::run_simulation;

    fn idle_result(id: &str) -> TestCaseResult<f64> {
        let spec = build_test_case::<f64>(id).unwrap();
        let trace = run_simulation(&spec, &mut IdleController, 0.05).unwrap();
        evaluate(&trace, &spec).unwrap()
    }

    #[test]
    fn idle_controller_collides_in_tc1() {
        let result = idle_result("TC1");
        assert!(!result.passed);
        assert_eq!(result.violations[0].requirement, Requirement::SR1);
        assert_eq!(collision_partners(&result), vec!["OverTaker".to_string()]);
        assert!(result.violations.iter().any(|v| v.requirement == Requirement::ExpectedManoeuvreMissing));
        assert_eq!(result.narrative.len(), result.violations.len());
    }

    #[test]
    fn idle_controller_passes_empty_road() {
        let result = idle_result("TC6");
        assert!(result.passed);
        assert!(result.violations.is_empty());
        assert_eq!(result.metrics.min_ttc, None);
    }

    #[test]
    fn mismatched_trace_is_rejected() {
        let spec = build_test_case::<f64>("TC1").unwrap();
        let other = build_test_case::<f64>("TC6").unwrap();
        let trace = run_simulation(&other, &mut IdleController, 0.05).unwrap();
        assert!(matches!(evaluate(&trace, &spec), Err(EvaluationError::Mismatch { .. })));
    }

    #[test]
    fn added_collision_never_turns_failure_into_pass() {
        let spec = build_test_case::<f64>("TC6").unwrap();
        let mut trace = run_simulation(&spec, &mut IdleController, 0.05).unwrap();
        trace.events.push(SimEvent {
            kind: EventKind::Collision,
            time: 1.0,
            subject: EGO_NAME.into(),
            object: Some("Ghost".into()),
            ego_speed_at_event: 30.0,
            started_at: None,
        });
        assert!(!evaluate(&trace, &spec).unwrap().passed);
    }

    #[test]
    fn metrics_are_positive_when_present() {
        let result = idle_result("TC2");
        assert!(result.metrics.min_ttc.is_some_and(|t| t > 0.0));
        assert!(result.metrics.min_headway.is_some_and(|h| h > 0.0));
    }

    #[test]
    fn result_serializes_to_json() {
        let result = idle_result("TC1");
        let json = serde_json::to_string(&result).unwrap();
        let back: TestCaseResult<f64> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, result);
    }
}
