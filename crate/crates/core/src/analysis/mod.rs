//! Measurements taken from experiment traces: overshoot and settling, the
//! sustained-oscillation detector, and the overshoot / damping / phase
//! margin conversions.

mod conversions;
mod filters;
mod oscillation;
mod step;

use thiserror::Error;

pub use conversions::{overshoot_from_zeta, phase_margin_from_zeta, zeta_from_overshoot};
pub use filters::{median_filter, moving_mean};
pub use oscillation::{
    detect_sustained, detect_sustained_with, OscillationVerdict, SustainedThresholds,
};
pub use step::{
    overshoot, peak_deviation, recovery_time, rise_time, StepMetrics, MEDIAN_WINDOW, SETTLING_BAND,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("analysis window has {got} samples, need at least {need}")]
    TooShort { got: usize, need: usize },
    #[error("value {value} outside the valid range {range}")]
    OutOfRange { value: f64, range: &'static str },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
