use std::collections::BTreeSet;

use thiserror::Error;

use crate::controller::{AgentObservation, Controller, ControllerFault, EgoObservation, Observation};
use crate::scalar::{ticks_for, Scalar};
use crate::scenario::{Mode, RoadSpec, ScenarioSpec, EGO_NAME, VEHICLE_LENGTH, VEHICLE_WIDTH};

use super::geometry::{detect_collision, footprint};
use super::kinematics::{apply_lane_change, step_agent, LaneChangePlan, ACCEL_LIMIT};
use super::{ControlAction, EventKind, SimEvent, SimTrace, TraceFrame, VehicleState};

pub const DEFAULT_DT: f64 = 0.05;
pub const MAX_DT: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("time step must lie in (0, {MAX_DT}], got {0}")]
    InvalidTimestep(f64),
    #[error("controller failed in {scenario_id} at tick {tick}: {fault}")]
    Controller { scenario_id: String, tick: usize, fault: ControllerFault },
}

/// Builds the controller's view of a frame.
pub fn observe<T: Scalar>(frame: &TraceFrame<T>, road: &RoadSpec<T>) -> Observation<T> {
    let ego = frame.ego().expect("every frame contains the ego vehicle");
    let mut agents: Vec<AgentObservation<T>> = frame
        .vehicles
        .iter()
        .filter(|v| !v.is_ego())
        .map(|v| AgentObservation {
            name: v.name.clone(),
            s_relative: v.s - ego.s,
            lat: v.lat,
            lane: v.lane,
            speed: v.speed,
            heading: v.heading.as_int(),
        })
        .collect();
    agents.sort_by(|a, b| {
        a.s_relative
            .abs()
            .partial_cmp(&b.s_relative.abs())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.name.cmp(&b.name))
    });
    Observation {
        time: frame.time,
        ego: EgoObservation {
            s: ego.s,
            lat: ego.lat,
            speed: ego.speed,
            lane: ego.lane,
            lane_count: road.lane_count,
            lane_width: road.lane_width,
        },
        agents,
    }
}

fn validate_action<T: Scalar>(action: ControlAction<T>) -> Result<ControlAction<T>, ControllerFault> {
    if !action.accel.is_finite() {
        return Err(ControllerFault::Malformed("accel is not a finite number".into()));
    }
    if !(-1..=1).contains(&action.lane_change) {
        return Err(ControllerFault::Malformed(format!("lane_change {} not in {{-1, 0, 1}}", action.lane_change)));
    }
    let limit = T::of(ACCEL_LIMIT);
    Ok(ControlAction { accel: action.accel.max(-limit).min(limit), lane_change: action.lane_change })
}

struct EgoLaneChange<T> {
    plan: LaneChangePlan<T>,
    start_tick: usize,
}

/// Runs one scenario to completion, or one tick past the first collision.
pub fn run_simulation<T: Scalar, C: Controller<T> + ?Sized>(
    spec: &ScenarioSpec<T>,
    controller: &mut C,
    dt: T,
) -> Result<SimTrace<T>, SimError> {
    if !(dt > T::zero() && dt <= T::of(MAX_DT)) {
        return Err(SimError::InvalidTimestep(dt.as_f64()));
    }
    let road = &spec.road;
    let length = T::of(VEHICLE_LENGTH);
    let width = T::of(VEHICLE_WIDTH);
    let frame_count = ticks_for(spec.duration, dt) + 1;

    let mut ego = VehicleState {
        name: EGO_NAME.to_string(),
        s: spec.ego_start,
        lat: road.lane_center(spec.ego_lane as i64),
        speed: spec.ego_speed,
        accel: T::zero(),
        lane: spec.ego_lane as i64,
        heading: crate::scenario::Heading::Forward,
        length,
        width,
    };
    ego.set_lat(ego.lat, road);
    let mut agents: Vec<VehicleState<T>> = spec
        .agents
        .iter()
        .map(|script| {
            let rear = spec.ego_start + script.initial_offset;
            let mut state = VehicleState {
                name: script.name.clone(),
                s: rear + script.heading.sign::<T>() * length,
                lat: T::zero(),
                speed: script.initial_speed,
                accel: T::zero(),
                lane: 0,
                heading: script.heading,
                length,
                width,
            };
            state.set_lat(road.lane_center(script.initial_lane), road);
            state
        })
        .collect();

    let mut frames: Vec<TraceFrame<T>> = Vec::with_capacity(frame_count);
    let mut events = Vec::new();
    let mut collided: BTreeSet<(String, String)> = BTreeSet::new();
    let mut lane_change: Option<EgoLaneChange<T>> = None;
    let drivable = road.drivable_width();
    let mut was_off_road = false;
    let mut halt_at: Option<usize> = None;

    for tick in 0..frame_count {
        let time = T::of(tick as f64) * dt;
        let mut vehicles = Vec::with_capacity(agents.len() + 1);
        vehicles.push(ego.clone());
        vehicles.extend(agents.iter().cloned());
        let frame = TraceFrame { time, vehicles };

        if let Some(active) = &lane_change {
            let elapsed = T::of((tick - active.start_tick) as f64) * dt;
            if active.plan.is_complete(elapsed) {
                events.push(SimEvent {
                    kind: EventKind::LaneChangeCompleted,
                    time,
                    subject: EGO_NAME.to_string(),
                    object: None,
                    ego_speed_at_event: ego.speed,
                    started_at: Some(T::of(active.start_tick as f64) * dt),
                });
                lane_change = None;
            }
        }
        let print = footprint(&ego);
        let off_road = print.lat_min < T::zero() || print.lat_max > drivable;
        if off_road && !was_off_road {
            events.push(SimEvent {
                kind: EventKind::OffRoad,
                time,
                subject: EGO_NAME.to_string(),
                object: None,
                ego_speed_at_event: ego.speed,
                started_at: None,
            });
        }
        was_off_road = off_road;
        for pair in detect_collision(&frame) {
            if collided.insert(pair.clone()) {
                events.push(SimEvent {
                    kind: EventKind::Collision,
                    time,
                    subject: pair.0,
                    object: Some(pair.1),
                    ego_speed_at_event: ego.speed,
                    started_at: None,
                });
                halt_at.get_or_insert(tick + 1);
            }
        }
        frames.push(frame);
        if halt_at == Some(tick) || tick + 1 == frame_count {
            break;
        }

        let obs = observe(frames.last().expect("frame just pushed"), road);
        let action = controller.act(tick, &obs).and_then(validate_action).map_err(|fault| SimError::Controller {
            scenario_id: spec.id.clone(),
            tick,
            fault,
        })?;
        let accel = if spec.mode == Mode::Caem { T::zero() } else { action.accel };
        if action.lane_change != 0 && lane_change.is_none() {
            lane_change =
                Some(EgoLaneChange { plan: apply_lane_change(&ego, action.lane_change, road), start_tick: tick });
        }

        let ego_now = ego.clone();
        let agents_now = std::mem::take(&mut agents);
        agents = agents_now
            .iter()
            .zip(&spec.agents)
            .map(|(state, script)| step_agent(state, script, road, time, &ego_now, dt))
            .collect();

        ego.s = ego_now.s + ego_now.speed * dt;
        ego.speed = (ego_now.speed + accel * dt).max(T::zero());
        ego.accel = accel;
        if let Some(active) = &lane_change {
            let elapsed = T::of((tick + 1 - active.start_tick) as f64) * dt;
            ego.set_lat(active.plan.lateral_at(elapsed), road);
        }
    }
    controller.finish();

    Ok(SimTrace { scenario_id: spec.id.clone(), dt, frames, events })
}
