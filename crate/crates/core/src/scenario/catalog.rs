use crate::scalar::Scalar;

use super::types::{AgentScript, ExpectedOutcome, Heading, Mode, Phase, RoadSpec, ScenarioSpec, Strip, VEHICLE_LENGTH};
use super::ScenarioError;

/// Evasive-manoeuvre test cases in catalog order.
pub const CAEM_CASES: [&str; 7] = ["TC1", "TC2", "TC3", "TC4", "TC5", "TC6", "TC7"];
/// Cruise-control test cases in catalog order.
pub const ACC_CASES: [&str; 3] = ["ACC1", "ACC2", "ACC3"];

pub const LANE_WIDTH: f64 = 3.5;
pub const ROAD_LENGTH: f64 = 1500.0;
/// Ego front-bumper position at t = 0, leaving room for agents that start behind it.
pub const EGO_START: f64 = 100.0;
pub const OVERTAKER_SPEED_FACTOR: f64 = 1.05;
pub const OVERTAKER_DECELERATION: f64 = 6.0;
pub const CUT_IN_START: f64 = 4.0;
pub const CUT_IN_DURATION: f64 = 2.0;
pub const TARGET_HEADWAY: f64 = 0.4;
const CAEM_DURATION: f64 = 20.0;
const ACC_DURATION: f64 = 30.0;
/// Gap between the ego front bumper and the static blocker when the Over-Taker starts braking.
const STATIC_BLOCKER_GAP: f64 = 40.0;
const MATCHING_BLOCKER_SPEED_FACTOR: f64 = 1.1;

fn kph(value: f64) -> f64 {
    value / 3.6
}

/// Initial rear-bumper gap of the Over-Taker so that, with both vehicles at
/// constant speed, the gap at the end of the cut-in equals `target_headway`
/// seconds of ego travel.
pub fn solve_initial_offset<T: Scalar>(
    ego_speed: T,
    overtaker_speed: T,
    cutin_end_time: T,
    target_headway: T,
    vehicle_length: T,
) -> Result<T, ScenarioError> {
    if !(ego_speed > T::zero()) || !(overtaker_speed >= ego_speed) {
        return Err(ScenarioError::InvalidArgument(format!(
            "need overtaker_speed >= ego_speed > 0, got {overtaker_speed} and {ego_speed}"
        )));
    }
    if !(cutin_end_time > T::zero()) {
        return Err(ScenarioError::InvalidArgument(format!("cut-in end time must be positive, got {cutin_end_time}")));
    }
    let offset = target_headway * ego_speed - (overtaker_speed - ego_speed) * cutin_end_time;
    // rear bumper at EGO_START + offset must be on the road
    let rear = T::of(EGO_START) + offset;
    if rear < T::zero() {
        return Err(ScenarioError::Infeasible(format!(
            "Over-Taker ({} m long) would start {} m behind the road start",
            vehicle_length,
            (-rear).as_f64()
        )));
    }
    Ok(offset)
}

fn highway<T: Scalar>(lane_count: usize) -> RoadSpec<T> {
    RoadSpec { lane_count, lane_width: T::of(LANE_WIDTH), length: T::of(ROAD_LENGTH), oncoming_strip: None }
}

fn overtaker<T: Scalar>(ego_speed: f64) -> Result<AgentScript<T>, ScenarioError> {
    let speed = ego_speed * OVERTAKER_SPEED_FACTOR;
    let offset = solve_initial_offset(
        T::of(ego_speed),
        T::of(speed),
        T::of(CUT_IN_START + CUT_IN_DURATION),
        T::of(TARGET_HEADWAY),
        T::of(VEHICLE_LENGTH),
    )?;
    Ok(AgentScript {
        name: "OverTaker".to_string(),
        initial_lane: 0,
        initial_offset: offset,
        initial_speed: T::of(speed),
        heading: Heading::Forward,
        phases: vec![
            Phase::Hold { duration: T::of(CUT_IN_START) },
            Phase::CutIn { target_lane: 1, duration: T::of(CUT_IN_DURATION) },
            Phase::Decelerate { rate: T::of(OVERTAKER_DECELERATION), floor_speed: T::zero() },
        ],
    })
}

fn cut_in_case<T: Scalar>(id: &str, speed_kph: f64, description: &str) -> Result<ScenarioSpec<T>, ScenarioError> {
    let ego_speed = kph(speed_kph);
    Ok(ScenarioSpec {
        id: id.to_string(),
        description: description.to_string(),
        mode: Mode::Caem,
        duration: T::of(CAEM_DURATION),
        road: highway(3),
        ego_lane: 1,
        ego_speed: T::of(ego_speed),
        ego_start: T::of(EGO_START),
        set_speed: None,
        agents: vec![overtaker(ego_speed)?],
        expected: ExpectedOutcome { lane_change_required: true, ..ExpectedOutcome::none() },
    })
}

/// Builds one of the catalog test cases.
pub fn build_test_case<T: Scalar>(tc_id: &str) -> Result<ScenarioSpec<T>, ScenarioError> {
    let spec = match tc_id {
        "TC1" => cut_in_case(
            "TC1",
            120.0,
            "Cut-in and decelerate at 120 kph. The ego vehicle drives at a constant 120 kph in the second \
             lane from the left of a three-lane highway. The Over-Taker starts in the leftmost lane slightly \
             faster than the ego, cuts in ahead of the ego and immediately brakes hard to a standstill. \
             At the moment it starts braking the headway to the ego is only 0.4 seconds.",
        )?,
        "TC2" => cut_in_case(
            "TC2",
            80.0,
            "Cut-in and decelerate at 80 kph. The ego vehicle drives at a constant 80 kph in the second \
             lane from the left of a three-lane highway. The Over-Taker starts in the leftmost lane slightly \
             faster than the ego, cuts in ahead of the ego and immediately brakes hard to a standstill. \
             At the moment it starts braking the headway to the ego is only 0.4 seconds.",
        )?,
        "TC3" => cut_in_case(
            "TC3",
            40.0,
            "Cut-in and decelerate at 40 kph. The ego vehicle drives at a constant 40 kph in the second \
             lane from the left of a three-lane highway. The Over-Taker starts in the leftmost lane slightly \
             faster than the ego, cuts in ahead of the ego and immediately brakes hard to a standstill. \
             At the moment it starts braking the headway to the ego is only 0.4 seconds.",
        )?,
        "TC4" => {
            let mut spec = cut_in_case::<T>(
                "TC4",
                108.0,
                "Cut-in and decelerate with a static lane blockage at 108 kph. The ego vehicle drives at a \
                 constant 108 kph in the second lane from the left of a three-lane highway. The Over-Taker \
                 cuts in ahead of the ego and brakes hard with a headway of 0.4 seconds. A stationary vehicle \
                 (Blocker) stands further ahead in the leftmost lane, the lane normally used for the evasive \
                 manoeuvre.",
            )?;
            let ego_speed = kph(108.0);
            spec.agents.push(AgentScript {
                name: "Blocker".to_string(),
                initial_lane: 0,
                initial_offset: T::of(STATIC_BLOCKER_GAP + ego_speed * (CUT_IN_START + CUT_IN_DURATION)),
                initial_speed: T::zero(),
                heading: Heading::Forward,
                phases: vec![Phase::Static],
            });
            spec
        }
        "TC5" => {
            let mut spec = cut_in_case::<T>(
                "TC5",
                108.0,
                "Cut-in and decelerate with a moving lane blockage at 108 kph. The ego vehicle drives at a \
                 constant 108 kph in the second lane from the left of a three-lane highway. The Over-Taker \
                 cuts in ahead of the ego and brakes hard with a headway of 0.4 seconds. A second vehicle \
                 (Blocker) approaches from behind in the leftmost lane and matches the ego speed once it is \
                 alongside the ego, blocking the leftmost lane.",
            )?;
            let ego_speed = kph(108.0);
            let blocker_speed = ego_speed * MATCHING_BLOCKER_SPEED_FACTOR;
            // front bumpers line up when the Over-Taker starts its cut-in
            let offset = -VEHICLE_LENGTH - (blocker_speed - ego_speed) * CUT_IN_START;
            spec.agents.push(AgentScript {
                name: "Blocker".to_string(),
                initial_lane: 0,
                initial_offset: T::of(offset),
                initial_speed: T::of(blocker_speed),
                heading: Heading::Forward,
                phases: vec![Phase::Hold { duration: T::of(CUT_IN_START) }, Phase::MatchSpeed],
            });
            spec
        }
        "TC6" => ScenarioSpec {
            id: "TC6".to_string(),
            description: "Empty road. The ego vehicle drives at a constant 120 kph in the second lane from the \
                          left of a three-lane highway with no other vehicle on the road. No lane change is \
                          needed."
                .to_string(),
            mode: Mode::Caem,
            duration: T::of(CAEM_DURATION),
            road: highway(3),
            ego_lane: 1,
            ego_speed: T::of(kph(120.0)),
            ego_start: T::of(EGO_START),
            set_speed: None,
            agents: Vec::new(),
            expected: ExpectedOutcome { lane_change_forbidden: true, ..ExpectedOutcome::none() },
        },
        "TC7" => {
            let speed = kph(80.0);
            ScenarioSpec {
                id: "TC7".to_string(),
                description: "Oncoming traffic. The ego vehicle drives at a constant 80 kph in the leftmost lane \
                              of a two-lane road. A vehicle (Oncoming) passes in the opposite direction on the \
                              other side of the left road edge. No lane change is needed."
                    .to_string(),
                mode: Mode::Caem,
                duration: T::of(CAEM_DURATION),
                road: RoadSpec {
                    oncoming_strip: Some(Strip { from: T::of(-LANE_WIDTH), to: T::zero() }),
                    ..highway(2)
                },
                ego_lane: 0,
                ego_speed: T::of(speed),
                ego_start: T::of(EGO_START),
                set_speed: None,
                agents: vec![AgentScript {
                    name: "Oncoming".to_string(),
                    initial_lane: -1,
                    initial_offset: T::of(300.0),
                    initial_speed: T::of(speed),
                    heading: Heading::Oncoming,
                    phases: vec![Phase::Hold { duration: T::of(CAEM_DURATION) }],
                }],
                expected: ExpectedOutcome { lane_change_forbidden: true, ..ExpectedOutcome::none() },
            }
        }
        "ACC1" => ScenarioSpec {
            id: "ACC1".to_string(),
            description: "Slower lead vehicle. The ego vehicle drives at 108 kph with a set speed of 108 kph in \
                          the middle lane. A lead vehicle (Lead) drives 60 m ahead in the same lane at a \
                          constant 79 kph. The ego must settle behind it at a time gap between 1.0 and 3.0 \
                          seconds without colliding."
                .to_string(),
            mode: Mode::Acc,
            duration: T::of(ACC_DURATION),
            road: highway(3),
            ego_lane: 1,
            ego_speed: T::of(30.0),
            ego_start: T::of(EGO_START),
            set_speed: Some(T::of(30.0)),
            agents: vec![AgentScript {
                name: "Lead".to_string(),
                initial_lane: 1,
                initial_offset: T::of(60.0),
                initial_speed: T::of(22.0),
                heading: Heading::Forward,
                phases: vec![Phase::Hold { duration: T::of(ACC_DURATION) }],
            }],
            expected: ExpectedOutcome { time_gap_band: Some((T::of(1.0), T::of(3.0))), ..ExpectedOutcome::none() },
        },
        "ACC2" => ScenarioSpec {
            id: "ACC2".to_string(),
            description: "Braking lead vehicle. The ego vehicle follows a lead vehicle (Lead) 45 m ahead in the \
                          middle lane, both at 108 kph. After 3 seconds the lead brakes at 3 m/s^2 down to \
                          36 kph. The ego must not collide."
                .to_string(),
            mode: Mode::Acc,
            duration: T::of(ACC_DURATION),
            road: highway(3),
            ego_lane: 1,
            ego_speed: T::of(30.0),
            ego_start: T::of(EGO_START),
            set_speed: Some(T::of(30.0)),
            agents: vec![AgentScript {
                name: "Lead".to_string(),
                initial_lane: 1,
                initial_offset: T::of(45.0),
                initial_speed: T::of(30.0),
                heading: Heading::Forward,
                phases: vec![
                    Phase::Hold { duration: T::of(3.0) },
                    Phase::Decelerate { rate: T::of(3.0), floor_speed: T::of(10.0) },
                ],
            }],
            expected: ExpectedOutcome::none(),
        },
        "ACC3" => ScenarioSpec {
            id: "ACC3".to_string(),
            description: "Empty road. The ego vehicle starts at 90 kph in the middle lane with a set speed of \
                          108 kph and no other vehicle on the road. It must reach the set speed within \
                          0.5 m/s and must not change lanes."
                .to_string(),
            mode: Mode::Acc,
            duration: T::of(ACC_DURATION),
            road: highway(3),
            ego_lane: 1,
            ego_speed: T::of(25.0),
            ego_start: T::of(EGO_START),
            set_speed: Some(T::of(30.0)),
            agents: Vec::new(),
            expected: ExpectedOutcome {
                lane_change_forbidden: true,
                set_speed_tolerance: Some(T::of(0.5)),
                ..ExpectedOutcome::none()
            },
        },
        other => return Err(ScenarioError::UnknownScenario(other.to_string())),
    };
    spec.validate()?;
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// Advances both vehicles at constant speed tick by tick and measures the
    /// rear-to-front gap once the cut-in has ended.
    fn simulated_gap(ego_speed: f64, ot_speed: f64, end: f64, offset: f64) -> f64 {
        let dt = 0.001;
        let (mut ego_front, mut ot_rear) = (0.0, offset);
        for _ in 0..(end / dt).round() as usize {
            ego_front += ego_speed * dt;
            ot_rear += ot_speed * dt;
        }
        ot_rear - ego_front
    }

    #[test]
    fn offset_equals_headway_gap_without_speed_difference() {
        let offset = solve_initial_offset(33.33, 33.33, 6.0, 0.4, 5.0).unwrap();
        assert_abs_diff_eq!(offset, 13.332, epsilon = 1e-9);
    }

    #[test]
    fn offset_matches_constant_speed_simulation() {
        // 100/3 is 120 kph exactly; with the rounded 33.33 the closed form gives 3.312
        for (ego, ot, expected) in [(100.0 / 3.0, 35.0, 3.33), (33.33, 35.0, 3.312), (11.11, 11.67, 1.08)] {
            let offset = solve_initial_offset(ego, ot, 6.0, 0.4, 5.0).unwrap();
            assert_abs_diff_eq!(offset, expected, epsilon = 0.01);
            let gap = simulated_gap(ego, ot, 6.0, offset);
            assert_abs_diff_eq!(gap, 0.4 * ego, epsilon = 1e-6);
        }
    }

    #[test]
    fn offset_rejects_invalid_arguments() {
        assert!(matches!(solve_initial_offset(30.0, 29.0, 6.0, 0.4, 5.0), Err(ScenarioError::InvalidArgument(_))));
        assert!(matches!(solve_initial_offset(0.0, 0.0, 6.0, 0.4, 5.0), Err(ScenarioError::InvalidArgument(_))));
        assert!(matches!(solve_initial_offset(30.0, 31.0, 0.0, 0.4, 5.0), Err(ScenarioError::InvalidArgument(_))));
    }

    #[test]
    fn offset_far_behind_the_road_start_is_infeasible() {
        assert!(matches!(solve_initial_offset(10.0, 40.0, 6.0, 0.4, 5.0), Err(ScenarioError::Infeasible(_))));
    }

    #[test]
    fn tc1_uses_120_kph_in_lane_one() {
        let spec = build_test_case::<f64>("TC1").unwrap();
        assert_abs_diff_eq!(spec.ego_speed, 33.33, epsilon = 0.01);
        assert_eq!(spec.ego_lane, 1);
        assert_eq!(spec.road.lane_count, 3);
        assert_eq!(spec.agents[0].name, "OverTaker");
        assert_eq!(spec.agents[0].initial_lane, 0);
    }

    #[test]
    fn tc4_has_static_blocker_ahead_in_lane_zero() {
        let spec = build_test_case::<f64>("TC4").unwrap();
        assert_abs_diff_eq!(spec.ego_speed, 30.0, epsilon = 1e-12);
        let blocker = spec.agent("Blocker").unwrap();
        assert_eq!(blocker.initial_lane, 0);
        assert_eq!(blocker.phases, vec![Phase::Static]);
        assert!(blocker.initial_offset > 0.0);
    }

    #[test]
    fn tc5_blocker_matches_ego_speed() {
        let spec = build_test_case::<f64>("TC5").unwrap();
        let blocker = spec.agent("Blocker").unwrap();
        assert_eq!(blocker.phases.last(), Some(&Phase::MatchSpeed));
    }

    #[test]
    fn tc6_is_empty_and_forbids_lane_changes() {
        let spec = build_test_case::<f64>("TC6").unwrap();
        assert!(spec.agents.is_empty());
        assert!(spec.expected.lane_change_forbidden);
    }

    #[test]
    fn tc7_has_one_oncoming_agent_in_the_strip() {
        let spec = build_test_case::<f64>("TC7").unwrap();
        assert_eq!(spec.ego_lane, 0);
        assert_eq!(spec.agents.len(), 1);
        let oncoming = &spec.agents[0];
        assert_eq!(oncoming.heading, Heading::Oncoming);
        assert!(spec.road.in_strip(spec.road.lane_center(oncoming.initial_lane)));
    }

    #[test]
    fn expected_outcomes_follow_the_case_groups() {
        for id in &CAEM_CASES[..5] {
            let spec = build_test_case::<f64>(id).unwrap();
            assert!(spec.expected.lane_change_required, "{id}");
        }
        for id in &CAEM_CASES[5..] {
            let spec = build_test_case::<f64>(id).unwrap();
            assert!(spec.expected.lane_change_forbidden, "{id}");
        }
    }

    #[test]
    fn catalog_is_pure_and_valid() {
        for id in CAEM_CASES.iter().chain(ACC_CASES.iter()) {
            let a = build_test_case::<f64>(id).unwrap();
            assert_eq!(a, build_test_case::<f64>(id).unwrap());
            a.validate().unwrap();
            build_test_case::<f32>(id).unwrap();
        }
    }

    #[test]
    fn unknown_case_is_rejected() {
        assert_eq!(build_test_case::<f64>("TC8"), Err(ScenarioError::UnknownScenario("TC8".into())));
    }
}
