use crate::scalar::Scalar;
use crate::scenario::{AgentScript, Phase, RoadSpec};

use super::VehicleState;

/// Duration of every lateral lane-change ramp.
pub const LANE_CHANGE_DURATION: f64 = 2.0;
/// Bound applied to commanded longitudinal acceleration.
pub const ACCEL_LIMIT: f64 = 8.0;

/// Raised-cosine lateral ramp between two lateral positions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaneChangePlan<T> {
    pub from_lat: T,
    pub to_lat: T,
    pub duration: T,
}

impl<T: Scalar> LaneChangePlan<T> {
    pub fn lateral_at(&self, elapsed: T) -> T {
        let progress = (elapsed / self.duration).max(T::zero()).min(T::one());
        let shape = (T::one() - (T::PI() * progress).cos()) / T::of(2.0);
        self.from_lat + (self.to_lat - self.from_lat) * shape
    }

    pub fn is_complete(&self, elapsed: T) -> bool {
        elapsed + T::time_eps() >= self.duration
    }
}

/// Plans a one-lane move from the ego's current lane toward the adjacent lane
/// center. Commands toward a lane that does not exist are still executed.
pub fn apply_lane_change<T: Scalar>(ego: &VehicleState<T>, command: i8, road: &RoadSpec<T>) -> LaneChangePlan<T> {
    let target_lane = road.lane_of(ego.lat) + i64::from(command.signum());
    LaneChangePlan { from_lat: ego.lat, to_lat: road.lane_center(target_lane), duration: T::of(LANE_CHANGE_DURATION) }
}

/// Lane an agent occupies when its `phase_index`-th phase begins.
fn lane_before_phase<T: Scalar>(script: &AgentScript<T>, phase_index: usize) -> i64 {
    script.phases[..phase_index].iter().fold(script.initial_lane, |lane, phase| match phase {
        Phase::CutIn { target_lane, .. } => *target_lane,
        _ => lane,
    })
}

/// Advances a scripted agent by one explicit-Euler step from `time` to `time + dt`.
pub fn step_agent<T: Scalar>(
    state: &VehicleState<T>,
    script: &AgentScript<T>,
    road: &RoadSpec<T>,
    time: T,
    ego: &VehicleState<T>,
    dt: T,
) -> VehicleState<T> {
    let mut next = state.clone();
    next.s = state.s + state.heading.sign::<T>() * state.speed * dt;
    let Some((index, phase, start)) = script.phase_at(time) else {
        return next;
    };
    match phase {
        Phase::Hold { .. } => next.accel = T::zero(),
        Phase::CutIn { target_lane, duration } => {
            let plan = LaneChangePlan {
                from_lat: road.lane_center(lane_before_phase(script, index)),
                to_lat: road.lane_center(target_lane),
                duration,
            };
            next.accel = T::zero();
            next.set_lat(plan.lateral_at(time + dt - start), road);
        }
        Phase::Decelerate { rate, floor_speed } => {
            next.speed = floor_speed.max(state.speed - rate * dt);
            next.accel = (next.speed - state.speed) / dt;
        }
        Phase::MatchSpeed => {
            next.speed = ego.speed;
            next.accel = (next.speed - state.speed) / dt;
        }
        Phase::Static => {
            next.speed = T::zero();
            next.accel = T::zero();
        }
    }
    next
}
