//! Rational transfer functions with dead time, frequency analysis and the
//! controller constructors used by the tuner.

pub mod controllers;
pub mod freq;
pub mod poly;
pub mod roots;
mod tf;

use thiserror::Error;

pub use controllers::{
    butterworth_lowpass, lead_max_phase_deg, lead_peak_frequency, make_lead, make_pi, make_zn_pid,
    zn_pid_gains, LeadParams, ZnPidGains,
};
pub use freq::{bode, margins, phase_deg, FrequencyPoint, MarginReport, PhaseTracker};
pub use tf::{format_coeff, TransferFunction};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LtiError {
    #[error("empty coefficient list")]
    EmptyPolynomial,
    #[error("non-finite coefficient")]
    NonFinite,
    #[error("denominator is identically zero")]
    ZeroDenominator,
    #[error("polynomial is identically zero")]
    ZeroPolynomial,
    #[error("dead time must be finite and >= 0, got {0}")]
    InvalidDeadTime(f64),
    #[error("loop with dead time cannot be closed as a rational function")]
    DelayNotClosable,
    #[error("pole on the imaginary axis at omega = {omega}")]
    PoleOnAxis { omega: f64 },
    #[error("frequency must be finite and > 0, got {0}")]
    InvalidFrequency(f64),
    #[error("invalid frequency band [{lo}, {hi}]")]
    InvalidBand { lo: f64, hi: f64 },
    #[error("constant denominator has no poles")]
    DegreeZero,
    #[error("polynomial degree {degree} exceeds the supported maximum of 10")]
    DegreeTooHigh { degree: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("transfer function is improper")]
    ImproperTf,
}
