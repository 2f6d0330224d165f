//! Radio-linked level crossing controller for single and multiple tracks,
//! with a discrete-event world simulator used to check that the crossing is
//! never open while a train is inside and always reopens after it leaves.

pub mod batch;
pub mod channel;
pub mod cli;
pub mod controller;
pub mod error;
pub mod gate;
pub mod generate;
pub mod protocol;
pub mod scenario;
pub mod sim;
pub mod trace;
pub mod verify;

pub use controller::{ControllerKind, ControllerState};
pub use error::ConfigError;
pub use scenario::{parse_scenario, Scenario};
pub use sim::{run_scenario, RunResult, Simulation};
pub use trace::Trace;
