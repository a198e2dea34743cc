//! The `key = value` controller language understood by the built-in runtime
//! and by the `refctl` child process.
//!
//! ```text
//! # evasive controller
//! controller = caem
//! trigger_headway = 0.75
//! trigger_ttc = 4.0
//! prefer = left
//! target_check = full
//! ```
//!
//! Lines starting with `#!` are directives. Only the child process honours them.

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerKind {
    /// Constant speed; evades by changing lanes.
    Caem,
    /// Longitudinal control only.
    Acc,
    /// Never acts.
    Noop,
    /// Changes lanes once at a fixed time, whatever the traffic.
    Eager,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn command(self) -> i8 {
        match self {
            Side::Left => -1,
            Side::Right => 1,
        }
    }

    pub fn other(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }
}

/// How thoroughly the target lane is checked before a lane change.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetCheck {
    /// Vehicles ahead, alongside and behind.
    Full,
    /// Vehicles ahead only.
    Ahead,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fault {
    /// Raises a runtime error on the first tick without any other vehicle.
    EmptyRoad,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Directive {
    HangOnInit,
    HangAtTick(usize),
    CrashAtTick(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerProgram {
    pub kind: ControllerKind,
    pub trigger_ttc: Option<f64>,
    pub trigger_headway: Option<f64>,
    pub prefer: Side,
    /// Try the other side when the preferred one is unavailable.
    pub fallback: bool,
    pub target_check: TargetCheck,
    pub target_ttc: f64,
    /// Minimum bumper gap to vehicles in the target lane.
    pub target_margin: f64,
    pub lane_change_at: f64,
    pub direction: Side,
    pub desired_time_gap: f64,
    pub max_accel: f64,
    pub comfort_decel: f64,
    pub min_gap: f64,
    pub fault: Option<Fault>,
    pub directives: Vec<Directive>,
}

impl ControllerProgram {
    fn with_kind(kind: ControllerKind) -> Self {
        ControllerProgram {
            kind,
            trigger_ttc: None,
            trigger_headway: None,
            prefer: Side::Left,
            fallback: true,
            target_check: TargetCheck::Full,
            target_ttc: 4.0,
            target_margin: 2.0,
            lane_change_at: 1.0,
            direction: Side::Right,
            desired_time_gap: 1.8,
            max_accel: 2.0,
            comfort_decel: 3.0,
            min_gap: 2.0,
            fault: None,
            directives: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProgramError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ProgramError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

impl std::error::Error for ProgramError {}

fn keyword<V: Copy>(value: &str, table: &[(&str, V)]) -> Result<V, String> {
    table.iter().find(|(name, _)| *name == value).map(|(_, v)| *v).ok_or_else(|| {
        let names: Vec<_> = table.iter().map(|(n, _)| *n).collect();
        format!("expected one of {}, found `{value}`", names.join("|"))
    })
}

fn positive(value: &str) -> Result<f64, String> {
    match value.parse::<f64>() {
        Ok(v) if v.is_finite() && v > 0.0 => Ok(v),
        _ => Err(format!("expected a positive number, found `{value}`")),
    }
}

fn non_negative(value: &str) -> Result<f64, String> {
    match value.parse::<f64>() {
        Ok(v) if v.is_finite() && v >= 0.0 => Ok(v),
        _ => Err(format!("expected a non-negative number, found `{value}`")),
    }
}

fn parse_directive(text: &str) -> Result<Directive, String> {
    let words: Vec<&str> = text.split_whitespace().collect();
    let tick = |w: &str| w.parse::<usize>().map_err(|_| format!("expected a tick number, found `{w}`"));
    match words.as_slice() {
        ["hang-on-init"] => Ok(Directive::HangOnInit),
        ["hang-at-tick", n] => Ok(Directive::HangAtTick(tick(n)?)),
        ["crash-at-tick", n] => Ok(Directive::CrashAtTick(tick(n)?)),
        _ => Err(format!("unknown directive `{}`", text.trim())),
    }
}

pub fn parse_program(source: &str) -> Result<ControllerProgram, ProgramError> {
    let mut entries: Vec<(usize, String, String)> = Vec::new();
    let mut directives = Vec::new();
    for (index, raw) in source.lines().enumerate() {
        let line = index + 1;
        let text = raw.trim();
        if let Some(directive) = text.strip_prefix("#!") {
            directives.push(parse_directive(directive).map_err(|message| ProgramError { line, message })?);
            continue;
        }
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let Some((key, value)) = text.split_once('=') else {
            return Err(ProgramError { line, message: format!("expected `key = value`, found `{text}`") });
        };
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || !key.chars().all(|c| c.is_ascii_lowercase() || c == '_') {
            return Err(ProgramError { line, message: format!("invalid key `{key}`") });
        }
        if entries.iter().any(|(_, k, _)| k == key) {
            return Err(ProgramError { line, message: format!("duplicate key `{key}`") });
        }
        entries.push((line, key.to_string(), value.to_string()));
    }

    let kind_entry = entries.iter().find(|(_, k, _)| k == "controller");
    let Some((kind_line, _, kind_value)) = kind_entry else {
        return Err(ProgramError { line: source.lines().count().max(1), message: "missing `controller = ...`".into() });
    };
    let kinds = [
        ("caem", ControllerKind::Caem),
        ("acc", ControllerKind::Acc),
        ("noop", ControllerKind::Noop),
        ("eager", ControllerKind::Eager),
    ];
    let kind = keyword(kind_value, &kinds).map_err(|message| ProgramError { line: *kind_line, message })?;
    let mut program = ControllerProgram::with_kind(kind);
    program.directives = directives;

    let sides = [("left", Side::Left), ("right", Side::Right)];
    for (line, key, value) in &entries {
        let v = value.as_str();
        let applied: Result<(), String> = (|| {
            match key.as_str() {
                "controller" => {}
                "trigger_ttc" => program.trigger_ttc = Some(positive(v)?),
                "trigger_headway" => program.trigger_headway = Some(positive(v)?),
                "prefer" => program.prefer = keyword(v, &sides)?,
                "fallback" => program.fallback = keyword(v, &[("true", true), ("false", false)])?,
                "target_check" => {
                    program.target_check = keyword(
                        v,
                        &[("full", TargetCheck::Full), ("ahead", TargetCheck::Ahead), ("none", TargetCheck::None)],
                    )?
                }
                "target_ttc" => program.target_ttc = positive(v)?,
                "target_margin" => program.target_margin = non_negative(v)?,
                "lane_change_at" => program.lane_change_at = non_negative(v)?,
                "direction" => program.direction = keyword(v, &sides)?,
                "desired_time_gap" => program.desired_time_gap = positive(v)?,
                "max_accel" => program.max_accel = positive(v)?,
                "comfort_decel" => program.comfort_decel = positive(v)?,
                "min_gap" => program.min_gap = non_negative(v)?,
                "fault" => program.fault = Some(keyword(v, &[("empty_road", Fault::EmptyRoad)])?),
                other => return Err(format!("unknown key `{other}`")),
            }
            Ok(())
        })();
        applied.map_err(|message| ProgramError { line: *line, message })?;
    }
    Ok(program)
}
