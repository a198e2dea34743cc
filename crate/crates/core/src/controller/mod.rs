//! Controller interface, reference controllers and the child-process host.

mod host;
mod observation;
pub mod program;
pub mod protocol;
pub mod reference;
mod status;

pub use host::{
    execute_case, fault_status, spawn, ChildController, ControllerHandle, ProcessConfig, RuntimeConfig, SpawnError,
    HANDSHAKE_TIMEOUT, TICK_TIMEOUT,
};
pub use observation::{
    AgentObservation, Controller, ControllerFault, EgoObservation, IdleController, InitInfo, Observation,
};
pub use program::{parse_program, ControllerProgram, ProgramError};
pub use reference::ReferenceController;
pub use status::ExecutabilityStatus;
