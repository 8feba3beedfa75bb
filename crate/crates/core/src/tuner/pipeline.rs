use serde::{Deserialize, Serialize};

use super::{
    find_responsive_gain, tune_gain, tune_integrator, Campaign, GainResult, IntegratorResult,
    Stage, TuneConfig, TuneError, TuneFailure, TuneLog,
};
use crate::analysis::{phase_margin_from_zeta, zeta_from_overshoot};
use crate::lti::{make_pi, LeadParams, TransferFunction};
use crate::sim::PlantSession;

pub const LEAD_ALPHA: f64 = 0.1;

/// Lead placed one decade above the PI corner: `τ = T_i/10`, `α = 0.1`,
/// `K_L = 1`.
pub fn assign_lead(ti: f64) -> Result<LeadParams, TuneError> {
    let lead = LeadParams {
        alpha: LEAD_ALPHA,
        tau: ti / 10.0,
        k_l: 1.0,
    };
    lead.to_tf()?;
    Ok(lead)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Controllers {
    pub pi: TransferFunction,
    pub lead: TransferFunction,
    pub pi_lead: TransferFunction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiLeadResult {
    pub k: f64,
    pub kp: f64,
    pub ti: f64,
    pub lead: LeadParams,
    /// Overshoot of the PI verification run.
    #[serde(with = "super::gain::inf_as_null")]
    pub achieved_m: f64,
    /// Overshoot of the PI·Lead verification run.
    #[serde(with = "super::gain::inf_as_null")]
    pub lead_m: f64,
    pub predicted_phase_margin_deg: Option<f64>,
    pub n_experiments: usize,
    pub integrator: IntegratorResult,
    pub gain: GainResult,
    pub controllers: Controllers,
    /// Carried separately in reports.
    #[serde(skip)]
    pub log: TuneLog,
}

/// `M -> ζ -> φ_m` in degrees, `None` outside `0 < M < 1`.
pub fn predicted_phase_margin(m: f64) -> Option<f64> {
    let z = zeta_from_overshoot(m).ok()?;
    phase_margin_from_zeta(z).ok()
}

/// Responsive gain, integrator sweep, gain sweep, Lead assignment and two
/// verification runs (PI alone, then PI·Lead).
pub fn tune_pi_lead<S: PlantSession>(
    session: S,
    cfg: &TuneConfig,
) -> Result<PiLeadResult, TuneFailure> {
    let mut c = Campaign::new(session, cfg.clone()).map_err(|error| TuneFailure {
        error,
        log: TuneLog::default(),
    })?;
    match stages(&mut c) {
        Ok(mut r) => {
            let (_, log) = c.into_parts();
            r.n_experiments = log.experiments.len();
            r.log = log;
            Ok(r)
        }
        Err(error) => Err(TuneFailure {
            error,
            log: c.into_parts().1,
        }),
    }
}

fn stages<S: PlantSession>(c: &mut Campaign<S>) -> Result<PiLeadResult, TuneError> {
    let k = find_responsive_gain(c)?;
    let integrator = tune_integrator(c, k)?;
    let ti = integrator.ti;
    let gain = tune_gain(c, k, ti)?;
    let kp = gain.kp;
    let lead = assign_lead(ti)?;

    let pi = make_pi(kp, ti)?;
    let lead_tf = lead.to_tf()?;
    let pi_lead = pi.series(&lead_tf);
    let achieved_m = c.run(Stage::VerifyPi, &pi, kp, Some(ti))?.overshoot();
    let lead_m = c
        .run(Stage::VerifyPiLead, &pi_lead, kp, Some(ti))?
        .overshoot();
    let [lo, hi] = c.config().m_band;
    if !(achieved_m >= lo && achieved_m <= hi) {
        c.warn(format!(
            "verification overshoot {achieved_m} outside the band [{lo}, {hi}]"
        ));
    }
    Ok(PiLeadResult {
        k,
        kp,
        ti,
        lead,
        achieved_m,
        lead_m,
        predicted_phase_margin_deg: predicted_phase_margin(achieved_m),
        n_experiments: 0,
        integrator,
        gain,
        controllers: Controllers {
            pi,
            lead: lead_tf,
            pi_lead,
        },
        log: TuneLog::default(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lead_for_known_integrator_time() {
        let l = assign_lead(0.31).unwrap().to_tf().unwrap();
        assert!((l.num()[0] - 0.031).abs() < 1e-15);
        assert_eq!(l.num()[1], 1.0);
        assert!((l.den()[0] - 0.0031).abs() < 1e-15);
        assert_eq!(l.den()[1], 1.0);
    }

    #[test]
    fn predicted_margin_band() {
        assert!((predicted_phase_margin(0.35).unwrap() - 35.0).abs() < 0.1);
        assert!(predicted_phase_margin(f64::INFINITY).is_none());
    }
}
