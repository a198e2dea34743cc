//! Road and agent data model, the built-in test catalog and the native scenario file format.

mod catalog;
mod format;
mod types;

pub use catalog::{
    build_test_case, solve_initial_offset, ACC_CASES, CAEM_CASES, CUT_IN_DURATION, CUT_IN_START, EGO_START, LANE_WIDTH,
    OVERTAKER_DECELERATION, OVERTAKER_SPEED_FACTOR, TARGET_HEADWAY,
};
pub use format::{parse_scenario, serialize_scenario};
pub use types::{
    AgentScript, ExpectedOutcome, Heading, Mode, Phase, RoadSpec, ScenarioSpec, Strip, EGO_NAME, VEHICLE_LENGTH,
    VEHICLE_WIDTH,
};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
    #[error("scenario infeasible: {0}")]
    Infeasible(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("invalid value for `{field}`: {message}")]
    Semantic { field: String, message: String },
}

impl ScenarioError {
    pub(crate) fn semantic(field: impl Into<String>, message: impl Into<String>) -> Self {
        ScenarioError::Semantic { field: field.into(), message: message.into() }
    }
}
