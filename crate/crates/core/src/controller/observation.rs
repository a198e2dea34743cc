use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;
use crate::scenario::{Heading, Mode};
use crate::sim::ControlAction;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct EgoObservation<T: Scalar> {
    pub s: T,
    pub lat: T,
    pub speed: T,
    pub lane: i64,
    pub lane_count: usize,
    pub lane_width: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct AgentObservation<T: Scalar> {
    pub name: String,
    /// Front-bumper offset from the ego front bumper, positive ahead.
    pub s_relative: T,
    pub lat: T,
    pub lane: i64,
    pub speed: T,
    pub heading: i32,
}

impl<T: Scalar> Observation<T> {
    pub fn cast<U: Scalar>(&self) -> Observation<U> {
        let c = |v: T| U::of(v.as_f64());
        Observation {
            time: c(self.time),
            ego: EgoObservation {
                s: c(self.ego.s),
                lat: c(self.ego.lat),
                speed: c(self.ego.speed),
                lane: self.ego.lane,
                lane_count: self.ego.lane_count,
                lane_width: c(self.ego.lane_width),
            },
            agents: self
                .agents
                .iter()
                .map(|a| AgentObservation {
                    name: a.name.clone(),
                    s_relative: c(a.s_relative),
                    lat: c(a.lat),
                    lane: a.lane,
                    speed: c(a.speed),
                    heading: a.heading,
                })
                .collect(),
        }
    }
}

impl<T: Scalar> AgentObservation<T> {
    pub fn heading(&self) -> Heading {
        Heading::from_int(i64::from(self.heading)).unwrap_or(Heading::Forward)
    }
}

/// What a controller sees at one tick. Agents are ordered by distance to the ego.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Observation<T: Scalar> {
    pub time: T,
    pub ego: EgoObservation<T>,
    pub agents: Vec<AgentObservation<T>>,
}

/// Scenario parameters a controller receives before the first tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitInfo {
    pub scenario_id: String,
    pub mode: Mode,
    pub dt: f64,
    pub lane_count: usize,
    pub lane_width: f64,
    pub vehicle_length: f64,
    pub vehicle_width: f64,
    pub set_speed: Option<f64>,
}

/// Why a controller could not produce an action.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
pub enum ControllerFault {
    #[error("no reply within the tick deadline")]
    Timeout,
    #[error("{0}")]
    Runtime(String),
    #[error("malformed action: {0}")]
    Malformed(String),
}

/// Anything that can drive the ego vehicle one tick at a time.
pub trait Controller<T: Scalar> {
    fn act(&mut self, tick: usize, obs: &Observation<T>) -> Result<ControlAction<T>, ControllerFault>;

    /// Called once after the last tick of a scenario.
    fn finish(&mut self) {}
}

impl<T: Scalar, C: Controller<T> + ?Sized> Controller<T> for Box<C> {
    fn act(&mut self, tick: usize, obs: &Observation<T>) -> Result<ControlAction<T>, ControllerFault> {
        (**self).act(tick, obs)
    }

    fn finish(&mut self) {
        (**self).finish()
    }
}

/// Keeps lane and speed forever.
#[derive(Debug, Default, Clone, Copy)]
pub struct IdleController;

impl<T: Scalar> Controller<T> for IdleController {
    fn act(&mut self, _tick: usize, _obs: &Observation<T>) -> Result<ControlAction<T>, ControllerFault> {
        Ok(ControlAction::idle())
    }
}
