//! Closed-loop generation and safety evaluation of driving controllers.
//!
//! Numeric code is generic over [`scalar::Scalar`]; the aliases below pin it to `f64`,
//! which is what the pipeline and the ledger use.

// `!(x > 0)` is how validation rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod controller;
pub mod ledger;
pub mod llm;
pub mod oracle;
pub mod orchestrator;
pub mod report;
pub mod scalar;
pub mod scenario;
pub mod sim;

pub type Scenario = scenario::ScenarioSpec<f64>;
pub type Trace = sim::SimTrace<f64>;
pub type Event = sim::SimEvent<f64>;
pub type Frame = sim::TraceFrame<f64>;
pub type Observation = controller::Observation<f64>;
pub type CaseResult = oracle::TestCaseResult<f64>;
pub type Outcome = report::CaseOutcome<f64>;
