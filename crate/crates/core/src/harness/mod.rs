//! Fixed-timestep session loop, synthetic agents, event log, replay and the
//! live server.

pub mod agents;
pub mod config;
pub mod log;
pub mod replay;
pub mod server;
pub mod sim;

use thiserror::Error;

use crate::vehicle::VehicleError;
use crate::world::WorldError;

pub use config::{Condition, DriverParams, PointerParams, SessionConfig};
pub use log::{check_integrity, decode_event, encode_event, Event, EventLog, EventRecord, LogHeader};
pub use replay::{replay, ReplayVerdict};
pub use sim::{run_session, Input, Simulation};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Vehicle(#[from] VehicleError),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("io: {0}")]
    Io(String),
    #[error("session aborted at tick {tick}: {reason}")]
    Aborted { tick: u64, reason: String, partial: Box<EventLog> },
}
