//! Model-free PI-Lead tuning and the ultimate-gain baseline. Everything in
//! here reaches the plant only through [`PlantSession`] experiments.

mod campaign;
mod config;
mod gain;
mod integrator;
mod pipeline;
mod responsive;
mod zn;

use thiserror::Error;

use crate::analysis::AnalysisError;
use crate::lti::LtiError;
use crate::sim::SessionError;

pub use campaign::{Campaign, ExperimentRecord, Outcome, Stage, TuneLog};
pub use config::{KSearch, KpGrid, Safety, TuneConfig, ZnConfig};
pub use gain::{tune_gain, GainPoint, GainResult};
pub use integrator::{integrator_time_constant, tune_integrator, IntegratorResult, SweepRow};
pub use pipeline::{
    assign_lead, predicted_phase_margin, tune_pi_lead, Controllers, PiLeadResult, LEAD_ALPHA,
};
pub use responsive::find_responsive_gain;
pub use zn::{zn_pid, zn_pid_with_k, zn_ultimate, ZnResult, ZnUltimate};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TuneError {
    #[error("invalid tuning configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error(transparent)]
    Lti(#[from] LtiError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("no gain up to {k_max} makes the proportional loop respond in time")]
    Unresponsive { k_max: f64 },
    #[error("the proportional loop oscillates or diverges at the first responsive gain {k}")]
    UnstablePlant { k: f64 },
    #[error(
        "no sustained oscillation while decreasing T_i down to {ti} s; \
         the plant behaves like a first-order lag under PI control"
    )]
    NoOscillationFound { ti: f64 },
    #[error("the PI loop oscillates for every T_i up to {ti} s")]
    NoStableIntegrator { ti: f64 },
    #[error("no sustained oscillation for proportional gains up to {k_max}")]
    NoOscillation { k_max: f64 },
    #[error("experiment budget of {max} runs exhausted")]
    BudgetExhausted { max: usize },
}

/// A failed pipeline together with everything logged up to the failure.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{error}")]
pub struct TuneFailure {
    pub error: TuneError,
    pub log: TuneLog,
}
