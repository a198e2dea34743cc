use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

use super::ScenarioError;

/// Longitudinal and lateral extent shared by every vehicle in the harness.
pub const VEHICLE_LENGTH: f64 = 5.0;
pub const VEHICLE_WIDTH: f64 = 2.0;

/// Reserved name of the controlled vehicle in traces and reports.
pub const EGO_NAME: &str = "Ego";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Mode {
    Acc,
    Caem,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Acc => "ACC",
            Mode::Caem => "CAEM",
        }
    }

    pub fn parse(text: &str) -> Option<Mode> {
        match text.to_ascii_lowercase().as_str() {
            "acc" => Some(Mode::Acc),
            "caem" => Some(Mode::Caem),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Heading {
    Forward,
    Oncoming,
}

impl Heading {
    pub fn sign<T: Scalar>(self) -> T {
        match self {
            Heading::Forward => T::one(),
            Heading::Oncoming => -T::one(),
        }
    }

    pub fn as_int(self) -> i32 {
        match self {
            Heading::Forward => 1,
            Heading::Oncoming => -1,
        }
    }

    pub fn from_int(value: i64) -> Option<Heading> {
        match value {
            1 => Some(Heading::Forward),
            -1 => Some(Heading::Oncoming),
            _ => None,
        }
    }
}

/// Lateral band outside the drivable area, reserved for opposite-direction traffic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Strip<T: Scalar> {
    pub from: T,
    pub to: T,
}

/// Straight multi-lane road. Lane 0 is the leftmost lane and the lateral
/// coordinate grows rightward from the left edge of the drivable area.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct RoadSpec<T: Scalar> {
    pub lane_count: usize,
    pub lane_width: T,
    pub length: T,
    pub oncoming_strip: Option<Strip<T>>,
}

impl<T: Scalar> RoadSpec<T> {
    pub fn drivable_width(&self) -> T {
        T::of(self.lane_count as f64) * self.lane_width
    }

    /// Lateral position of a lane center. Negative indices address the band left of lane 0.
    pub fn lane_center(&self, lane: i64) -> T {
        (T::of(lane as f64) + T::of(0.5)) * self.lane_width
    }

    pub fn lane_of(&self, lat: T) -> i64 {
        (lat / self.lane_width).floor().to_i64().unwrap_or(i64::MIN)
    }

    pub fn has_lane(&self, lane: i64) -> bool {
        lane >= 0 && (lane as usize) < self.lane_count
    }

    /// True when the lateral center lies inside the oncoming strip.
    pub fn in_strip(&self, lat: T) -> bool {
        self.oncoming_strip.is_some_and(|strip| lat > strip.from && lat < strip.to)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.lane_count < 1 {
            return Err(ScenarioError::semantic("road.lane_count", "must be at least 1"));
        }
        if !(self.lane_width > T::zero()) {
            return Err(ScenarioError::semantic("road.lane_width", "must be positive"));
        }
        if !(self.length > T::zero()) {
            return Err(ScenarioError::semantic("road.length", "must be positive"));
        }
        if let Some(strip) = self.oncoming_strip {
            if !(strip.to > strip.from) {
                return Err(ScenarioError::semantic("road.oncoming_strip", "band must have positive width"));
            }
            let outside = strip.to <= T::zero() || strip.from >= self.drivable_width();
            if !outside {
                return Err(ScenarioError::semantic("road.oncoming_strip", "band must lie outside the drivable area"));
            }
        }
        Ok(())
    }
}

/// One step of a scripted agent's behaviour. `Decelerate`, `MatchSpeed` and
/// `Static` are open-ended and therefore only valid as the final phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", bound = "")]
pub enum Phase<T: Scalar> {
    Hold { duration: T },
    CutIn { target_lane: i64, duration: T },
    Decelerate { rate: T, floor_speed: T },
    MatchSpeed,
    Static,
}

impl<T: Scalar> Phase<T> {
    pub fn duration(&self) -> Option<T> {
        match *self {
            Phase::Hold { duration } | Phase::CutIn { duration, .. } => Some(duration),
            Phase::Decelerate { .. } | Phase::MatchSpeed | Phase::Static => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct AgentScript<T: Scalar> {
    pub name: String,
    pub initial_lane: i64,
    /// Gap from the ego front bumper to this agent's rear bumper at t = 0; negative when behind.
    pub initial_offset: T,
    pub initial_speed: T,
    pub heading: Heading,
    pub phases: Vec<Phase<T>>,
}

impl<T: Scalar> AgentScript<T> {
    /// Phase active at `time` together with the time that phase started.
    pub fn phase_at(&self, time: T) -> Option<(usize, Phase<T>, T)> {
        let mut start = T::zero();
        for (index, phase) in self.phases.iter().enumerate() {
            match phase.duration() {
                Some(duration) if time + T::time_eps() < start + duration => {
                    return Some((index, *phase, start));
                }
                Some(duration) => {
                    if index + 1 == self.phases.len() {
                        // the final bounded phase keeps its kinematics once finished
                        return Some((index, *phase, start));
                    }
                    start = start + duration;
                }
                None => return Some((index, *phase, start)),
            }
        }
        None
    }

    pub fn validate(&self, index: usize, road: &RoadSpec<T>) -> Result<(), ScenarioError> {
        let field = |name: &str| format!("agents[{index}].{name}");
        if self.name.trim().is_empty() || self.name.chars().any(char::is_whitespace) {
            return Err(ScenarioError::semantic(field("name"), "must be a non-empty identifier"));
        }
        if self.name == EGO_NAME {
            return Err(ScenarioError::semantic(field("name"), "name is reserved for the ego vehicle"));
        }
        let lane_ok = road.has_lane(self.initial_lane)
            || road.oncoming_strip.is_some_and(|_| road.in_strip(road.lane_center(self.initial_lane)));
        if !lane_ok {
            return Err(ScenarioError::semantic(field("lane"), "lane index out of range"));
        }
        if !(self.initial_speed >= T::zero()) {
            return Err(ScenarioError::semantic(field("speed"), "must be non-negative"));
        }
        if self.phases.is_empty() {
            return Err(ScenarioError::semantic(field("phases"), "at least one phase is required"));
        }
        for (p, phase) in self.phases.iter().enumerate() {
            let pfield = |name: &str| format!("agents[{index}].phases[{p}].{name}");
            match *phase {
                Phase::Hold { duration } | Phase::CutIn { duration, .. } if !(duration > T::zero()) => {
                    return Err(ScenarioError::semantic(pfield("duration"), "must be positive"));
                }
                Phase::CutIn { target_lane, .. } if !road.has_lane(target_lane) => {
                    return Err(ScenarioError::semantic(pfield("target_lane"), "lane index out of range"));
                }
                Phase::Decelerate { rate, floor_speed } => {
                    if !(rate > T::zero()) {
                        return Err(ScenarioError::semantic(pfield("rate"), "must be positive"));
                    }
                    if !(floor_speed >= T::zero()) {
                        return Err(ScenarioError::semantic(pfield("floor_speed"), "must be non-negative"));
                    }
                }
                _ => {}
            }
            if phase.duration().is_none() && p + 1 != self.phases.len() {
                return Err(ScenarioError::semantic(pfield("kind"), "open-ended phase must be the last one"));
            }
        }
        let is_static = self.phases.iter().any(|p| matches!(p, Phase::Static));
        if is_static && (self.phases.len() != 1 || self.initial_speed != T::zero()) {
            return Err(ScenarioError::semantic(
                field("phases"),
                "a static agent has zero speed and exactly one phase",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ExpectedOutcome<T: Scalar> {
    pub lane_change_required: bool,
    pub lane_change_forbidden: bool,
    /// Band the ego time gap must stay inside over the final seconds of the run.
    pub time_gap_band: Option<(T, T)>,
    /// Allowed deviation from the set speed at the end of the run.
    pub set_speed_tolerance: Option<T>,
}

impl<T: Scalar> ExpectedOutcome<T> {
    pub fn none() -> Self {
        ExpectedOutcome {
            lane_change_required: false,
            lane_change_forbidden: false,
            time_gap_band: None,
            set_speed_tolerance: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ScenarioSpec<T: Scalar> {
    pub id: String,
    pub description: String,
    pub mode: Mode,
    pub duration: T,
    pub road: RoadSpec<T>,
    pub ego_lane: usize,
    pub ego_speed: T,
    /// Ego front-bumper position at t = 0.
    pub ego_start: T,
    pub set_speed: Option<T>,
    pub agents: Vec<AgentScript<T>>,
    pub expected: ExpectedOutcome<T>,
}

impl<T: Scalar> ScenarioSpec<T> {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.id.trim().is_empty() {
            return Err(ScenarioError::semantic("id", "must be non-empty"));
        }
        if self.description.trim().is_empty() {
            return Err(ScenarioError::semantic("description", "must be non-empty"));
        }
        if !(self.duration > T::zero()) {
            return Err(ScenarioError::semantic("duration", "must be positive"));
        }
        self.road.validate()?;
        if self.ego_lane >= self.road.lane_count {
            return Err(ScenarioError::semantic("ego_lane", "lane index out of range"));
        }
        if !(self.ego_speed >= T::zero()) {
            return Err(ScenarioError::semantic("ego.speed", "must be non-negative"));
        }
        if let Some(set) = self.set_speed {
            if !(set > T::zero()) {
                return Err(ScenarioError::semantic("ego.set_speed", "must be positive"));
            }
        }
        if self.expected.lane_change_required && self.expected.lane_change_forbidden {
            return Err(ScenarioError::semantic(
                "expected",
                "lane_change_required and lane_change_forbidden are mutually exclusive",
            ));
        }
        if let Some((lo, hi)) = self.expected.time_gap_band {
            if !(lo >= T::zero() && hi > lo) {
                return Err(ScenarioError::semantic("expected.time_gap_band", "need 0 <= min < max"));
            }
        }
        if self.expected.set_speed_tolerance.is_some() && self.set_speed.is_none() {
            return Err(ScenarioError::semantic("expected.set_speed_tolerance", "requires ego.set_speed"));
        }
        for (index, agent) in self.agents.iter().enumerate() {
            agent.validate(index, &self.road)?;
            if self.agents[..index].iter().any(|other| other.name == agent.name) {
                return Err(ScenarioError::semantic(format!("agents[{index}].name"), "duplicate agent name"));
            }
            let rear = self.ego_start + agent.initial_offset;
            if rear < T::zero() {
                return Err(ScenarioError::Infeasible(format!(
                    "agent {} would start behind the road start",
                    agent.name
                )));
            }
        }
        Ok(())
    }

    pub fn agent(&self, name: &str) -> Option<&AgentScript<T>> {
        self.agents.iter().find(|a| a.name == name)
    }

    /// Converts the numeric fields to another scalar type.
    pub fn cast<U: Scalar>(&self) -> ScenarioSpec<U> {
        let c = |v: T| U::of(v.as_f64());
        let phase = |p: &Phase<T>| match *p {
            Phase::Hold { duration } => Phase::Hold { duration: c(duration) },
            Phase::CutIn { target_lane, duration } => Phase::CutIn { target_lane, duration: c(duration) },
            Phase::Decelerate { rate, floor_speed } => Phase::Decelerate { rate: c(rate), floor_speed: c(floor_speed) },
            Phase::MatchSpeed => Phase::MatchSpeed,
            Phase::Static => Phase::Static,
        };
        ScenarioSpec {
            id: self.id.clone(),
            description: self.description.clone(),
            mode: self.mode,
            duration: c(self.duration),
            road: RoadSpec {
                lane_count: self.road.lane_count,
                lane_width: c(self.road.lane_width),
                length: c(self.road.length),
                oncoming_strip: self.road.oncoming_strip.map(|s| Strip { from: c(s.from), to: c(s.to) }),
            },
            ego_lane: self.ego_lane,
            ego_speed: c(self.ego_speed),
            ego_start: c(self.ego_start),
            set_speed: self.set_speed.map(c),
            agents: self
                .agents
                .iter()
                .map(|a| AgentScript {
                    name: a.name.clone(),
                    initial_lane: a.initial_lane,
                    initial_offset: c(a.initial_offset),
                    initial_speed: c(a.initial_speed),
                    heading: a.heading,
                    phases: a.phases.iter().map(phase).collect(),
                })
                .collect(),
            expected: ExpectedOutcome {
                lane_change_required: self.expected.lane_change_required,
                lane_change_forbidden: self.expected.lane_change_forbidden,
                time_gap_band: self.expected.time_gap_band.map(|(a, b)| (c(a), c(b))),
                set_speed_tolerance: self.expected.set_speed_tolerance.map(c),
            },
        }
    }
}
