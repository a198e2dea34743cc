//! Deterministic fixed-timestep kinematic simulation.

mod engine;
mod geometry;
mod io;
mod kinematics;

pub use engine::{observe, run_simulation, SimError, DEFAULT_DT, MAX_DT};
pub use geometry::{detect_collision, footprint, overlap_area, Footprint};
pub use io::{read_events_jsonl, read_trace_csv, write_events_jsonl, write_trace_csv, TraceIoError};
pub use kinematics::{apply_lane_change, step_agent, LaneChangePlan, ACCEL_LIMIT, LANE_CHANGE_DURATION};

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;
use crate::scenario::{Heading, RoadSpec, EGO_NAME};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct VehicleState<T: Scalar> {
    pub name: String,
    /// Front-bumper position along the road.
    pub s: T,
    /// Footprint center, measured rightward from the left drivable edge.
    pub lat: T,
    pub speed: T,
    pub accel: T,
    /// Always `floor(lat / lane_width)`; refreshed whenever `lat` changes.
    pub lane: i64,
    pub heading: Heading,
    pub length: T,
    pub width: T,
}

impl<T: Scalar> VehicleState<T> {
    pub fn is_ego(&self) -> bool {
        self.name == EGO_NAME
    }

    pub fn set_lat(&mut self, lat: T, road: &RoadSpec<T>) {
        self.lat = lat;
        self.lane = road.lane_of(lat);
    }

    /// Rear bumper position along the road.
    pub fn rear(&self) -> T {
        self.s - self.heading.sign::<T>() * self.length
    }
}

/// Longitudinal acceleration request plus a discrete lane-change command.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ControlAction<T: Scalar> {
    pub accel: T,
    /// -1 one lane left, 0 keep lane, +1 one lane right.
    pub lane_change: i8,
}

impl<T: Scalar> ControlAction<T> {
    pub fn idle() -> Self {
        ControlAction { accel: T::zero(), lane_change: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct TraceFrame<T: Scalar> {
    pub time: T,
    pub vehicles: Vec<VehicleState<T>>,
}

impl<T: Scalar> TraceFrame<T> {
    pub fn ego(&self) -> Option<&VehicleState<T>> {
        self.vehicles.iter().find(|v| v.is_ego())
    }

    pub fn vehicle(&self, name: &str) -> Option<&VehicleState<T>> {
        self.vehicles.iter().find(|v| v.name == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventKind {
    Collision,
    OffRoad,
    LaneChangeCompleted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SimEvent<T: Scalar> {
    pub kind: EventKind,
    pub time: T,
    pub subject: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub object: Option<String>,
    pub ego_speed_at_event: T,
    /// Initiation time of a completed lane change.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub started_at: Option<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SimTrace<T: Scalar> {
    pub scenario_id: String,
    pub dt: T,
    pub frames: Vec<TraceFrame<T>>,
    pub events: Vec<SimEvent<T>>,
}

impl<T: Scalar> SimTrace<T> {
    pub fn ego_events(&self, kind: EventKind) -> impl Iterator<Item = &SimEvent<T>> {
        self.events.iter().filter(move |e| e.kind == kind && e.subject == EGO_NAME)
    }

    pub fn frame_at(&self, time: T) -> Option<&TraceFrame<T>> {
        self.frames.iter().find(|f| (f.time - time).abs() <= T::time_eps())
    }
}
