//! Line-delimited JSON spoken between the host and a controller child process.
//!
//! Host to child:
//!
//! ```text
//! {"type":"init","scenario_id":"TC1","mode":"CAEM","dt":0.05,"road":{"lane_count":3,"lane_width":3.5},"ego":{"length":5.0,"width":2.0},"set_speed":null}
//! {"type":"observe","tick":0,"time":0.0,"ego":{...},"agents":[...]}
//! {"type":"end"}
//! ```
//!
//! Child to host:
//!
//! ```text
//! {"type":"ready"}
//! {"type":"act","accel":0.0,"lane_change":-1}
//! {"type":"error","kind":"syntax"|"runtime","tick":3,"message":"..."}   (tick optional)
//! ```

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;
use crate::scenario::{Mode, ScenarioSpec, VEHICLE_LENGTH, VEHICLE_WIDTH};

use super::{InitInfo, Observation};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoadInfo {
    pub lane_count: usize,
    pub lane_width: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BodyInfo {
    pub length: f64,
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum HostMessage {
    Init {
        scenario_id: String,
        mode: Mode,
        dt: f64,
        road: RoadInfo,
        ego: BodyInfo,
        set_speed: Option<f64>,
    },
    Observe {
        tick: usize,
        #[serde(flatten)]
        observation: Observation<f64>,
    },
    End,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Syntax,
    Runtime,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ChildMessage {
    Ready,
    Act {
        accel: f64,
        lane_change: i8,
    },
    Error {
        kind: ErrorKind,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tick: Option<usize>,
        message: String,
    },
}

impl HostMessage {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("host messages always serialize") + "\n"
    }
}

impl ChildMessage {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("child messages always serialize") + "\n"
    }
}

impl From<&InitInfo> for HostMessage {
    fn from(info: &InitInfo) -> Self {
        HostMessage::Init {
            scenario_id: info.scenario_id.clone(),
            mode: info.mode,
            dt: info.dt,
            road: RoadInfo { lane_count: info.lane_count, lane_width: info.lane_width },
            ego: BodyInfo { length: info.vehicle_length, width: info.vehicle_width },
            set_speed: info.set_speed,
        }
    }
}

impl InitInfo {
    pub fn from_spec<T: Scalar>(spec: &ScenarioSpec<T>, dt: T) -> Self {
        InitInfo {
            scenario_id: spec.id.clone(),
            mode: spec.mode,
            dt: dt.as_f64(),
            lane_count: spec.road.lane_count,
            lane_width: spec.road.lane_width.as_f64(),
            vehicle_length: VEHICLE_LENGTH,
            vehicle_width: VEHICLE_WIDTH,
            set_speed: spec.set_speed.map(Scalar::as_f64),
        }
    }

    /// Inverse of the `init` message.
    pub fn from_message(message: &HostMessage) -> Option<Self> {
        match message {
            HostMessage::Init { scenario_id, mode, dt, road, ego, set_speed } => Some(InitInfo {
                scenario_id: scenario_id.clone(),
                mode: *mode,
                dt: *dt,
                lane_count: road.lane_count,
                lane_width: road.lane_width,
                vehicle_length: ego.length,
                vehicle_width: ego.width,
                set_speed: *set_speed,
            }),
            _ => None,
        }
    }
}
