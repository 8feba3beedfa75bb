use serde::{Deserialize, Serialize};

use super::{TuneConfig, TuneError};
use crate::analysis::{self, OscillationVerdict, StepMetrics, SustainedThresholds};
use crate::lti::TransferFunction;
use crate::sim::{PlantSession, ScenarioSpec, Trace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    ResponsiveGain,
    Integrator,
    Gain,
    VerifyPi,
    VerifyPiLead,
    Zn,
}

/// One experiment as logged. Verdict and metrics are recomputable from the
/// trace alone using `verdict_skip` and `x_ref`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub index: usize,
    pub stage: Stage,
    pub controller: TransferFunction,
    pub kp: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub ti: Option<f64>,
    pub x_ref: f64,
    pub samples: usize,
    pub aborted: bool,
    pub diverged: bool,
    pub verdict_skip: f64,
    pub verdict: Option<OscillationVerdict>,
    pub metrics: Option<StepMetrics>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TuneLog {
    pub experiments: Vec<ExperimentRecord>,
    pub warnings: Vec<String>,
}

/// Result of one experiment as seen by the tuning stages.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub index: usize,
    pub trace: Trace,
    pub verdict: Option<OscillationVerdict>,
    pub metrics: Option<StepMetrics>,
}

impl Outcome {
    pub fn cut_short(&self) -> bool {
        self.trace.aborted || self.trace.diverged
    }

    /// At or past the stability limit: sustained or growing oscillation, or
    /// a run stopped by the amplitude guard.
    pub fn oscillating(&self) -> bool {
        self.cut_short() || self.verdict.is_some_and(|v| v.at_limit())
    }

    pub fn omega(&self) -> Option<f64> {
        self.verdict.and_then(|v| v.omega)
    }

    /// Overshoot with runs cut short scored as infinite.
    pub fn overshoot(&self) -> f64 {
        match (self.cut_short(), self.metrics) {
            (false, Some(m)) => m.overshoot_m,
            _ => f64::INFINITY,
        }
    }
}

/// Verdict used throughout the tuner: the configured transient skip, or no
/// skip for runs cut short (whatever was recorded is all there is).
pub fn verdict_for(trace: &Trace, th: &SustainedThresholds) -> (f64, Option<OscillationVerdict>) {
    let skip = if trace.aborted || trace.diverged {
        0.0
    } else {
        th.transient_skip
    };
    let th = SustainedThresholds {
        transient_skip: skip,
        ..*th
    };
    (skip, analysis::detect_sustained_with(trace, &th).ok())
}

/// A plant session plus the tuning configuration, experiment budget and log.
pub struct Campaign<S: PlantSession> {
    session: S,
    cfg: TuneConfig,
    log: TuneLog,
}

impl<S: PlantSession> Campaign<S> {
    pub fn new(session: S, cfg: TuneConfig) -> Result<Campaign<S>, TuneError> {
        cfg.validate()?;
        Ok(Campaign {
            session,
            cfg,
            log: TuneLog::default(),
        })
    }

    pub fn config(&self) -> &TuneConfig {
        &self.cfg
    }

    pub fn log(&self) -> &TuneLog {
        &self.log
    }

    pub fn n_experiments(&self) -> usize {
        self.log.experiments.len()
    }

    pub fn warn(&mut self, msg: impl Into<String>) {
        self.log.warnings.push(msg.into());
    }

    pub fn into_parts(self) -> (S, TuneLog) {
        (self.session, self.log)
    }

    pub fn session_mut(&mut self) -> &mut S {
        &mut self.session
    }

    /// Runs one step experiment with the configured template.
    pub fn run(
        &mut self,
        stage: Stage,
        controller: &TransferFunction,
        kp: f64,
        ti: Option<f64>,
    ) -> Result<Outcome, TuneError> {
        let scenario = self.cfg.scenario();
        self.run_scenario(stage, controller, kp, ti, &scenario)
    }

    pub fn run_scenario(
        &mut self,
        stage: Stage,
        controller: &TransferFunction,
        kp: f64,
        ti: Option<f64>,
        scenario: &ScenarioSpec,
    ) -> Result<Outcome, TuneError> {
        let max = self.cfg.safety.max_experiments;
        if self.log.experiments.len() >= max {
            return Err(TuneError::BudgetExhausted { max });
        }
        let trace = self.session.run(controller, scenario)?;
        let (verdict_skip, verdict) = verdict_for(&trace, &self.cfg.sustained);
        let metrics = analysis::overshoot(&trace, scenario.x_ref).ok();
        let index = self.log.experiments.len();
        self.log.experiments.push(ExperimentRecord {
            index,
            stage,
            controller: controller.clone(),
            kp,
            ti,
            x_ref: scenario.x_ref,
            samples: trace.len(),
            aborted: trace.aborted,
            diverged: trace.diverged,
            verdict_skip,
            verdict,
            metrics,
        });
        Ok(Outcome {
            index,
            trace,
            verdict,
            metrics,
        })
    }
}
