use serde::{Deserialize, Serialize};

use super::TuneError;
use crate::analysis::SustainedThresholds;
use crate::sim::ScenarioSpec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KSearch {
    pub k_start: f64,
    pub k_factor: f64,
    pub k_max: f64,
    /// Fraction of `x_ref` the proportional loop must reach.
    pub rise_fraction: f64,
    /// Deadline for reaching it; `None` means the whole horizon.
    pub rise_time: Option<f64>,
}

impl Default for KSearch {
    fn default() -> Self {
        KSearch {
            k_start: 1.0,
            k_factor: 10.0,
            k_max: 1e6,
            rise_fraction: 0.63,
            rise_time: Some(0.5),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KpGrid {
    pub delta_min: f64,
    pub delta_max: f64,
    pub points: usize,
    pub max_bisections: usize,
}

impl Default for KpGrid {
    fn default() -> Self {
        KpGrid {
            delta_min: 0.1,
            delta_max: 10.0,
            points: 25,
            max_bisections: 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Safety {
    /// Runs stop once `|x - x_ref|` exceeds this multiple of `|x_ref|`.
    pub abort_amplitude: f64,
    pub max_experiments: usize,
}

impl Default for Safety {
    fn default() -> Self {
        Safety {
            abort_amplitude: 5.0,
            max_experiments: 400,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ZnConfig {
    pub gain_factor: f64,
    pub rel_width: f64,
    pub max_bisections: usize,
    pub filter_hz: f64,
    pub filter_order: usize,
    pub filter_in_loop: bool,
}

impl Default for ZnConfig {
    fn default() -> Self {
        ZnConfig {
            gain_factor: 1.5,
            rel_width: 0.02,
            max_bisections: 10,
            filter_hz: 1000.0,
            filter_order: 2,
            filter_in_loop: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TuneConfig {
    pub ti_start: f64,
    pub ti_decay: f64,
    pub ti_refine: f64,
    pub kp_grid: KpGrid,
    pub m_band: [f64; 2],
    pub m_target: f64,
    pub k_search: KSearch,
    pub experiment: ScenarioSpec,
    pub safety: Safety,
    pub sustained: SustainedThresholds,
    pub zn: ZnConfig,
}

impl Default for TuneConfig {
    fn default() -> Self {
        TuneConfig {
            ti_start: 0.1,
            ti_decay: 0.9,
            ti_refine: 0.97,
            kp_grid: KpGrid::default(),
            m_band: [0.30, 0.40],
            m_target: 0.35,
            k_search: KSearch::default(),
            experiment: ScenarioSpec::step(0.01, 10.0),
            safety: Safety::default(),
            sustained: SustainedThresholds::default(),
            zn: ZnConfig::default(),
        }
    }
}

impl TuneConfig {
    pub fn validate(&self) -> Result<(), TuneError> {
        let bad = |m: &str| Err(TuneError::InvalidConfig(m.to_string()));
        if !(self.ti_start > 0.0) {
            return bad("ti_start must be > 0");
        }
        if !(self.ti_decay > 0.0 && self.ti_decay < 1.0) {
            return bad("ti_decay must lie in (0, 1)");
        }
        if !(self.ti_refine > self.ti_decay && self.ti_refine < 1.0) {
            return bad("ti_refine must lie in (ti_decay, 1)");
        }
        let [lo, hi] = self.m_band;
        if !(lo > 0.0 && lo < hi && hi < 1.0) {
            return bad("m_band must satisfy 0 < lo < hi < 1");
        }
        if !(self.m_target >= lo && self.m_target <= hi) {
            return bad("m_target must lie inside m_band");
        }
        let g = &self.kp_grid;
        if !(g.delta_min > 0.0 && g.delta_min < 1.0 && g.delta_max > 1.0 && g.points >= 3) {
            return bad("kp_grid needs delta_min < 1 < delta_max and >= 3 points");
        }
        let k = &self.k_search;
        if !(k.k_start > 0.0 && k.k_factor > 1.0 && k.k_max >= k.k_start) {
            return bad("k_search needs k_start > 0, k_factor > 1, k_max >= k_start");
        }
        if !(k.rise_fraction > 0.0 && k.rise_fraction < 1.0) {
            return bad("rise_fraction must lie in (0, 1)");
        }
        if k.rise_time.is_some_and(|t| !(t > 0.0)) {
            return bad("rise_time must be > 0");
        }
        if !(self.safety.abort_amplitude > 1.0) || self.safety.max_experiments == 0 {
            return bad("safety needs abort_amplitude > 1 and max_experiments > 0");
        }
        if self.experiment.x_ref == 0.0 {
            return bad("experiment x_ref must be nonzero");
        }
        let z = &self.zn;
        if !(z.gain_factor > 1.0 && z.rel_width > 0.0 && z.filter_hz > 0.0 && z.filter_order >= 1) {
            return bad("zn settings out of range");
        }
        self.experiment
            .validate()
            .map_err(|e| TuneError::InvalidConfig(e.to_string()))
    }

    /// The experiment template with the safety bound applied.
    pub(crate) fn scenario(&self) -> ScenarioSpec {
        ScenarioSpec {
            abort_amplitude: Some(self.safety.abort_amplitude),
            ..self.experiment.clone()
        }
    }
}
