//! PI, Lead and filtered Ziegler–Nichols PID constructors.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{poly, LtiError, TransferFunction};

fn positive(name: &str, v: f64) -> Result<(), LtiError> {
    if !(v.is_finite() && v > 0.0) {
        return Err(LtiError::InvalidParameter(format!(
            "{name} must be > 0, got {v}"
        )));
    }
    Ok(())
}

/// `K_p (T_i s + 1) / (T_i s)`.
pub fn make_pi(kp: f64, ti: f64) -> Result<TransferFunction, LtiError> {
    positive("K_p", kp)?;
    positive("T_i", ti)?;
    TransferFunction::new([kp * ti, kp], [ti, 0.0])
}

/// Lead compensator parameters `K_L (τ s + 1) / (α τ s + 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeadParams {
    pub alpha: f64,
    pub tau: f64,
    pub k_l: f64,
}

impl LeadParams {
    pub fn to_tf(&self) -> Result<TransferFunction, LtiError> {
        make_lead(self.alpha, self.tau, self.k_l)
    }

    pub fn peak_frequency(&self) -> f64 {
        lead_peak_frequency(self.alpha, self.tau)
    }
}

pub fn make_lead(alpha: f64, tau: f64, k_l: f64) -> Result<TransferFunction, LtiError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(LtiError::InvalidParameter(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    positive("tau", tau)?;
    positive("K_L", k_l)?;
    TransferFunction::new([k_l * tau, k_l], [alpha * tau, 1.0])
}

/// Frequency of maximum phase lead, `1/(√α τ)`.
pub fn lead_peak_frequency(alpha: f64, tau: f64) -> f64 {
    1.0 / (alpha.sqrt() * tau)
}

/// Maximum phase lead `arcsin((1-α)/(1+α))` in degrees.
pub fn lead_max_phase_deg(alpha: f64) -> f64 {
    ((1.0 - alpha) / (1.0 + alpha)).asin().to_degrees()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZnPidGains {
    pub kp: f64,
    pub ti: f64,
    pub td: f64,
}

/// Classic ultimate-sensitivity rules: 0.6 K_u, 0.5 T_u, 0.125 T_u.
pub fn zn_pid_gains(ku: f64, tu: f64) -> Result<ZnPidGains, LtiError> {
    positive("K_u", ku)?;
    positive("T_u", tu)?;
    Ok(ZnPidGains {
        kp: 0.6 * ku,
        ti: 0.5 * tu,
        td: 0.125 * tu,
    })
}

/// Butterworth low-pass with unit DC gain, cutoff `f_c` in Hz.
pub fn butterworth_lowpass(f_c: f64, order: usize) -> Result<TransferFunction, LtiError> {
    positive("cutoff", f_c)?;
    if order == 0 || order > 8 {
        return Err(LtiError::InvalidParameter(format!(
            "filter order must be in 1..=8, got {order}"
        )));
    }
    let wc = 2.0 * PI * f_c;
    let n = order as f64;
    let poles: Vec<Complex64> = (1..=order)
        .map(|k| Complex64::from_polar(wc, PI * (2.0 * k as f64 + n - 1.0) / (2.0 * n)))
        .collect();
    let mut den = poly::from_roots(&poles);
    // Pin the constant term so the DC gain is exactly one.
    let last = den.len() - 1;
    den[last] = wc.powi(order as i32);
    TransferFunction::new([wc.powi(order as i32)], den)
}

/// `K_p (1 + 1/(T_i s) + T_d s) · F(s)` with a Butterworth `F` of the given
/// order and cutoff (Hz).
pub fn make_zn_pid(ku: f64, tu: f64, f_c: f64, order: usize) -> Result<TransferFunction, LtiError> {
    let g = zn_pid_gains(ku, tu)?;
    let pid = TransferFunction::new([g.kp * g.ti * g.td, g.kp * g.ti, g.kp], [g.ti, 0.0])?;
    Ok(pid.series(&butterworth_lowpass(f_c, order)?))
}
