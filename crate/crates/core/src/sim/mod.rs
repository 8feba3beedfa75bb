//! Fixed-step closed-loop simulation of linear and voice-coil-like plants,
//! trace records, and the opaque plant session used by the tuner.

mod closed_loop;
pub mod discrete;
mod plant;
mod scenario;
mod session;
mod trace;

use thiserror::Error;

use crate::lti::LtiError;

pub use closed_loop::{simulate_closed_loop, NoiseSource};
pub use discrete::{discretize, DelayLine, DifferenceEquation, DiscreteFilter};
pub use plant::{
    catalog, sgn_with_stiction, GainTable, PlantModel, PlantSpec, Resonance, VcmLike, CATALOG,
};
pub use scenario::{Disturbance, ScenarioSpec};
pub use session::{make_session, PlantSession, SimulatedSession};
pub use trace::{fmt_g9, round9, Trace, CSV_HEADER};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error(transparent)]
    Lti(#[from] LtiError),
    #[error("invalid plant: {0}")]
    InvalidPlant(String),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("invalid controller: {0}")]
    InvalidController(String),
    #[error("invalid trace: {0}")]
    InvalidTrace(String),
    #[error("unknown plant {0:?}")]
    UnknownPlant(String),
    #[error("unknown plant parameter {0:?}")]
    UnknownParameter(String),
    #[error("line {line}: {msg}")]
    Csv { line: usize, msg: String },
}

/// Failure of a plant session: local simulation errors, or transport and
/// protocol failures of a remote plant.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SessionError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("transport: {0}")]
    Transport(String),
    #[error("protocol: {0}")]
    Protocol(String),
    #[error("remote plant error: {0}")]
    Remote(String),
}
