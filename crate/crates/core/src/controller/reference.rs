//! Reference controllers interpreted from a [`ControllerProgram`].

use crate::scalar::Scalar;
use crate::sim::ControlAction;

use super::program::{ControllerKind, ControllerProgram, Fault, Side, TargetCheck};
use super::{AgentObservation, Controller, ControllerFault, InitInfo, Observation};

/// Evades cut-ins, checks both neighbouring lanes, prefers the left.
pub const GOLD_CAEM: &str = include_str!("../../fixtures/controllers/gold_caem.ctl");
/// Holds lane and speed.
pub const NAIVE: &str = include_str!("../../fixtures/controllers/naive.ctl");
/// Moves one lane right after one second whatever the traffic.
pub const EAGER: &str = include_str!("../../fixtures/controllers/eager.ctl");
/// Car-following with a desired time gap.
pub const GOLD_ACC: &str = include_str!("../../fixtures/controllers/gold_acc.ctl");

/// Lateral distance from the lane center beyond which a lane change is assumed in progress.
const CENTERED: f64 = 0.05;

#[derive(Debug, Clone)]
pub struct ReferenceController {
    program: ControllerProgram,
    init: InitInfo,
    eager_done: bool,
}

impl ReferenceController {
    pub fn new(program: ControllerProgram, init: InitInfo) -> Self {
        ReferenceController { program, init, eager_done: false }
    }

    pub fn program(&self) -> &ControllerProgram {
        &self.program
    }

    fn decide(&mut self, obs: &Observation<f64>) -> Result<ControlAction<f64>, ControllerFault> {
        if self.program.fault == Some(Fault::EmptyRoad) && obs.agents.is_empty() {
            return Err(ControllerFault::Runtime("IndexError: list index out of range (no agents observed)".into()));
        }
        Ok(match self.program.kind {
            ControllerKind::Noop => ControlAction::idle(),
            ControllerKind::Eager => {
                if !self.eager_done && obs.time >= self.program.lane_change_at - 1e-9 {
                    self.eager_done = true;
                    ControlAction { accel: 0.0, lane_change: self.program.direction.command() }
                } else {
                    ControlAction::idle()
                }
            }
            ControllerKind::Caem => ControlAction { accel: 0.0, lane_change: self.evade(obs) },
            ControllerKind::Acc => ControlAction { accel: self.follow(obs), lane_change: 0 },
        })
    }

    fn lead<'a>(&self, obs: &'a Observation<f64>) -> Option<&'a AgentObservation<f64>> {
        obs.agents
            .iter()
            .filter(|a| a.heading == 1 && a.lane == obs.ego.lane && a.s_relative > 0.0)
            .min_by(|a, b| a.s_relative.total_cmp(&b.s_relative))
    }

    fn evade(&self, obs: &Observation<f64>) -> i8 {
        let ego = &obs.ego;
        let center = (ego.lane as f64 + 0.5) * ego.lane_width;
        if (ego.lat - center).abs() > CENTERED {
            return 0;
        }
        let Some(lead) = self.lead(obs) else { return 0 };
        let gap = lead.s_relative - self.init.vehicle_length;
        let closing = ego.speed - lead.speed;
        let by_ttc = self.program.trigger_ttc.is_some_and(|limit| closing > 0.0 && gap / closing < limit);
        let by_headway = self.program.trigger_headway.is_some_and(|limit| ego.speed > 0.0 && gap / ego.speed < limit);
        if !(by_ttc || by_headway) {
            return 0;
        }
        let mut sides = vec![self.program.prefer];
        if self.program.fallback {
            sides.push(self.program.prefer.other());
        }
        sides
            .into_iter()
            .find(|side| self.lane_is_free(obs, ego.lane + i64::from(side.command())))
            .map_or(0, Side::command)
    }

    fn lane_is_free(&self, obs: &Observation<f64>, lane: i64) -> bool {
        if lane < 0 || lane >= obs.ego.lane_count as i64 {
            return false;
        }
        let length = self.init.vehicle_length;
        let margin = self.program.target_margin;
        let horizon = self.program.target_ttc;
        let v = obs.ego.speed;
        obs.agents.iter().filter(|a| a.heading == 1 && a.lane == lane).all(|a| {
            let ahead = a.s_relative > 0.0;
            match self.program.target_check {
                TargetCheck::None => true,
                TargetCheck::Ahead if !ahead => true,
                _ if ahead => {
                    let gap = a.s_relative - length;
                    let closing = v - a.speed;
                    gap > margin && !(closing > 0.0 && gap / closing < horizon)
                }
                _ => {
                    let gap = -a.s_relative - length;
                    let closing = a.speed - v;
                    gap > margin && !(closing > 0.0 && gap / closing < horizon)
                }
            }
        })
    }

    /// Intelligent-driver-model acceleration toward the set speed.
    fn follow(&self, obs: &Observation<f64>) -> f64 {
        let p = &self.program;
        let v = obs.ego.speed;
        let v0 = self.init.set_speed.unwrap_or(v).max(0.1);
        let free = 1.0 - (v / v0).powi(4);
        let interaction = self.lead(obs).map_or(0.0, |lead| {
            let gap = (lead.s_relative - self.init.vehicle_length).max(0.1);
            let wanted = p.min_gap
                + (v * p.desired_time_gap + v * (v - lead.speed) / (2.0 * (p.max_accel * p.comfort_decel).sqrt()))
                    .max(0.0);
            (wanted / gap).powi(2)
        });
        p.max_accel * (free - interaction)
    }
}

impl<T: Scalar> Controller<T> for ReferenceController {
    fn act(&mut self, _tick: usize, obs: &Observation<T>) -> Result<ControlAction<T>, ControllerFault> {
        let action = self.decide(&obs.cast())?;
        Ok(ControlAction { accel: T::of(action.accel), lane_change: action.lane_change })
    }
}
