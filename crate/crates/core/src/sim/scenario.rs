use serde::{Deserialize, Serialize};

use super::SimError;

/// Rectangular disturbance pulse, active for `t_on <= t < t_off`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Disturbance {
    pub t_on: f64,
    pub t_off: f64,
    pub force: f64,
}

fn default_dt() -> f64 {
    1e-4
}

/// One step experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub x_ref: f64,
    pub t_end: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disturbance: Option<Disturbance>,
    #[serde(default)]
    pub gravity_feedforward: f64,
    /// Stop the run once `|x - x_ref|` exceeds this multiple of `|x_ref|`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub abort_amplitude: Option<f64>,
}

impl ScenarioSpec {
    pub fn step(x_ref: f64, t_end: f64) -> ScenarioSpec {
        ScenarioSpec {
            x_ref,
            t_end,
            dt: default_dt(),
            disturbance: None,
            gravity_feedforward: 0.0,
            abort_amplitude: None,
        }
    }

    /// Step to `x_ref` followed by a short push on the plant input: `force`
    /// during `[t_on, t_on + width)`.
    pub fn with_pulse(x_ref: f64, t_end: f64, t_on: f64, width: f64, force: f64) -> ScenarioSpec {
        ScenarioSpec {
            disturbance: Some(Disturbance {
                t_on,
                t_off: t_on + width,
                force,
            }),
            ..ScenarioSpec::step(x_ref, t_end)
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidScenario(m));
        if !self.x_ref.is_finite() {
            return bad("x_ref must be finite".into());
        }
        if !(self.dt.is_finite()
            && self.dt > 0.0
            && self.t_end.is_finite()
            && self.dt <= self.t_end)
        {
            return bad(format!(
                "need 0 < dt <= t_end, got dt={} t_end={}",
                self.dt, self.t_end
            ));
        }
        if self.t_end / self.dt > 1e8 {
            return bad("too many samples".into());
        }
        if let Some(d) = self.disturbance {
            if !(d.t_on.is_finite()
                && d.force.is_finite()
                && d.t_on < d.t_off
                && d.t_off <= self.t_end)
            {
                return bad("disturbance needs t_on < t_off <= t_end".into());
            }
        }
        if !self.gravity_feedforward.is_finite() {
            return bad("gravity_feedforward must be finite".into());
        }
        if let Some(a) = self.abort_amplitude {
            if !(a > 0.0) {
                return bad("abort_amplitude must be > 0".into());
            }
        }
        Ok(())
    }

    pub fn n_samples(&self) -> usize {
        (self.t_end / self.dt).round() as usize + 1
    }

    pub fn disturbance_at(&self, t: f64) -> f64 {
        match self.disturbance {
            Some(d) if t >= d.t_on && t < d.t_off => d.force,
            _ => 0.0,
        }
    }
}
