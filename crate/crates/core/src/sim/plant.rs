//! Plant descriptions, the catalog of test plants and the per-sample plant
//! models the simulator steps.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::discrete::{delay_samples, DelayLine, DiscreteFilter};
use super::SimError;
use crate::lti::{poly, TransferFunction};

/// Piecewise-linear map from control input (V) to force (N); linear
/// extrapolation past both ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainTable {
    pub u: Vec<f64>,
    pub force: Vec<f64>,
}

impl GainTable {
    pub fn linear(k: f64) -> GainTable {
        GainTable {
            u: vec![-1.0, 1.0],
            force: vec![-k, k],
        }
    }

    /// `F(u) = k·u·(1 + ripple·sin(πu/span))` sampled on `n` points over
    /// `[-span, span]`.
    pub fn rippled(k: f64, ripple: f64, span: f64, n: usize) -> GainTable {
        let u: Vec<f64> = (0..n)
            .map(|i| -span + 2.0 * span * i as f64 / (n - 1) as f64)
            .collect();
        let force = u
            .iter()
            .map(|x| k * x * (1.0 + ripple * (PI * x / span).sin()))
            .collect();
        GainTable { u, force }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.u.len() < 2 || self.u.len() != self.force.len() {
            return Err(SimError::InvalidPlant(
                "input gain table needs >= 2 points of equal length".into(),
            ));
        }
        if self.u.iter().chain(&self.force).any(|v| !v.is_finite()) {
            return Err(SimError::InvalidPlant(
                "input gain table is not finite".into(),
            ));
        }
        if self.u.windows(2).any(|w| w[1] <= w[0]) {
            return Err(SimError::InvalidPlant(
                "input gain table u must be strictly increasing".into(),
            ));
        }
        if self.force.windows(2).any(|w| w[1] < w[0]) {
            return Err(SimError::InvalidPlant(
                "input gain table must be monotone non-decreasing".into(),
            ));
        }
        Ok(())
    }

    pub fn eval(&self, u: f64) -> f64 {
        let n = self.u.len();
        let i = match self.u.partition_point(|x| *x <= u) {
            0 => 0,
            k if k >= n => n - 2,
            k => k - 1,
        };
        let (u0, u1) = (self.u[i], self.u[i + 1]);
        let (f0, f1) = (self.force[i], self.force[i + 1]);
        f0 + (f1 - f0) * (u - u0) / (u1 - u0)
    }
}

/// Flexible appendage coupled to the main mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Resonance {
    pub stiffness: f64,
    pub damping: f64,
    pub appendage_mass: f64,
}

fn default_friction_eps() -> f64 {
    1e-5
}

/// Voice-coil-like actuator: mass driven through a nonlinear input gain, with
/// viscous and back-EMF damping, Coulomb friction, gravity load and an
/// input delay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VcmLike {
    pub mass: f64,
    pub viscous: f64,
    #[serde(default)]
    pub back_emf: f64,
    pub coulomb: f64,
    pub input_gain: GainTable,
    #[serde(default)]
    pub resonance: Option<Resonance>,
    #[serde(default)]
    pub delay: f64,
    #[serde(default)]
    pub gravity: f64,
    #[serde(default = "default_friction_eps")]
    pub friction_eps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlantModel {
    LinearTf(TransferFunction),
    VcmLike(VcmLike),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantSpec {
    pub model: PlantModel,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub seed: u64,
}

impl PlantSpec {
    pub fn linear(tf: TransferFunction) -> PlantSpec {
        PlantSpec {
            model: PlantModel::LinearTf(tf),
            noise_sigma: 0.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(SimError::InvalidPlant("noise_sigma must be >= 0".into()));
        }
        match &self.model {
            PlantModel::LinearTf(tf) => {
                if !tf.is_proper() {
                    return Err(SimError::InvalidPlant("plant must be proper".into()));
                }
                let den = tf.den();
                if poly::origin_multiplicity(den) != 1 {
                    return Err(SimError::InvalidPlant(
                        "plant must be type-one: exactly one pole at s = 0".into(),
                    ));
                }
                if *tf.num().last().unwrap() == 0.0 {
                    return Err(SimError::InvalidPlant(
                        "plant numerator must not vanish at s = 0".into(),
                    ));
                }
            }
            PlantModel::VcmLike(v) => {
                let pos = |name: &str, x: f64| -> Result<(), SimError> {
                    if !(x.is_finite() && x > 0.0) {
                        return Err(SimError::InvalidPlant(format!("{name} must be > 0")));
                    }
                    Ok(())
                };
                let nonneg = |name: &str, x: f64| -> Result<(), SimError> {
                    if !(x.is_finite() && x >= 0.0) {
                        return Err(SimError::InvalidPlant(format!("{name} must be >= 0")));
                    }
                    Ok(())
                };
                pos("mass", v.mass)?;
                pos("friction_eps", v.friction_eps)?;
                nonneg("viscous", v.viscous)?;
                nonneg("back_emf", v.back_emf)?;
                nonneg("coulomb", v.coulomb)?;
                nonneg("delay", v.delay)?;
                if !v.gravity.is_finite() {
                    return Err(SimError::InvalidPlant("gravity must be finite".into()));
                }
                v.input_gain.validate()?;
                if let Some(r) = v.resonance {
                    pos("resonance.stiffness", r.stiffness)?;
                    nonneg("resonance.damping", r.damping)?;
                    pos("resonance.appendage_mass", r.appendage_mass)?;
                }
            }
        }
        Ok(())
    }
}

/// Karnopp-style regularized sign: `v/eps` clamped to `[-1, 1]`.
pub fn sgn_with_stiction(v: f64, eps: f64) -> f64 {
    (v / eps).clamp(-1.0, 1.0)
}

pub const CATALOG: [&str; 5] = [
    "pure_integrator",
    "second_order_type_one",
    "fourth_order_resonant",
    "delayed_type_one",
    "vcm_like",
];

fn take<'a>(
    overrides: &'a BTreeMap<String, f64>,
    allowed: &[&str],
) -> Result<impl Fn(&str, f64) -> f64 + 'a, SimError> {
    for key in overrides.keys() {
        if !allowed.contains(&key.as_str()) {
            return Err(SimError::UnknownParameter(key.clone()));
        }
    }
    Ok(move |k: &str, default: f64| overrides.get(k).copied().unwrap_or(default))
}

/// Named test plants with documented defaults; `overrides` replaces
/// individual parameters by name.
pub fn catalog(name: &str, overrides: &BTreeMap<String, f64>) -> Result<PlantSpec, SimError> {
    let tf = |num: Vec<f64>, den: Vec<f64>, dead: f64| -> Result<TransferFunction, SimError> {
        Ok(TransferFunction::new(num, den)?.with_dead_time(dead)?)
    };
    let (model, noise) = match name {
        "pure_integrator" => {
            let p = take(overrides, &["gain", "noise_sigma"])?;
            (
                PlantModel::LinearTf(tf(vec![p("gain", 1.0)], vec![1.0, 0.0], 0.0)?),
                p("noise_sigma", 0.0),
            )
        }
        "second_order_type_one" | "delayed_type_one" => {
            let delayed = name == "delayed_type_one";
            let p = take(overrides, &["gain", "tau", "dead_time", "noise_sigma"])?;
            let dead = if delayed {
                p("dead_time", 0.005)
            } else {
                p("dead_time", 0.0)
            };
            (
                PlantModel::LinearTf(tf(
                    vec![p("gain", 1.0)],
                    vec![p("tau", 0.1), 1.0, 0.0],
                    dead,
                )?),
                p("noise_sigma", 0.0),
            )
        }
        "fourth_order_resonant" => {
            let p = take(
                overrides,
                &[
                    "gain",
                    "tau",
                    "resonance_freq",
                    "resonance_zeta",
                    "noise_sigma",
                ],
            )?;
            let wr = p("resonance_freq", 100.0);
            let zr = p("resonance_zeta", 0.2);
            let base = vec![p("tau", 0.1), 1.0, 0.0];
            let den = poly::mul(&base, &[1.0, 2.0 * zr * wr, wr * wr]);
            (
                PlantModel::LinearTf(tf(vec![p("gain", 1.0) * wr * wr], den, 0.0)?),
                p("noise_sigma", 0.0),
            )
        }
        "vcm_like" => {
            let p = take(
                overrides,
                &[
                    "mass",
                    "viscous",
                    "back_emf",
                    "coulomb",
                    "force_constant",
                    "gain_ripple",
                    "delay",
                    "gravity",
                    "friction_eps",
                    "noise_sigma",
                    "resonance_stiffness",
                    "resonance_damping",
                    "appendage_mass",
                ],
            )?;
            let resonance = overrides.get("resonance_stiffness").map(|k| Resonance {
                stiffness: *k,
                damping: p("resonance_damping", 0.0),
                appendage_mass: p("appendage_mass", 0.05),
            });
            (
                PlantModel::VcmLike(VcmLike {
                    mass: p("mass", 1.0),
                    viscous: p("viscous", 2.0),
                    back_emf: p("back_emf", 28.0),
                    coulomb: p("coulomb", 0.5),
                    input_gain: GainTable::rippled(
                        p("force_constant", 3.0),
                        p("gain_ripple", 0.02),
                        10.0,
                        41,
                    ),
                    resonance,
                    delay: p("delay", 0.002),
                    gravity: p("gravity", 0.0),
                    friction_eps: p("friction_eps", 1e-5),
                }),
                p("noise_sigma", 5e-5),
            )
        }
        other => return Err(SimError::UnknownPlant(other.to_string())),
    };
    let spec = PlantSpec {
        model,
        noise_sigma: noise,
        seed: 0,
    };
    spec.validate()?;
    Ok(spec)
}

/// Per-sample plant state. `peek` exposes the next clean output as an affine
/// function of the next plant input; `commit` advances by one sample.
#[derive(Debug, Clone)]
pub(crate) enum PlantState {
    Linear {
        filter: DiscreteFilter,
        delay: DelayLine,
    },
    Vcm {
        p: VcmLike,
        state: [f64; 4],
        delay: DelayLine,
        dt: f64,
        substeps: usize,
    },
}

impl PlantState {
    pub(crate) fn new(model: &PlantModel, dt: f64) -> Result<PlantState, SimError> {
        Ok(match model {
            PlantModel::LinearTf(tf) => PlantState::Linear {
                filter: DiscreteFilter::new(tf, dt)?,
                delay: DelayLine::new(delay_samples(tf.dead_time(), dt)),
            },
            PlantModel::VcmLike(v) => {
                // Keep RK4 stable inside the friction band, where the Coulomb
                // term acts like a damper of rate coulomb/(eps·mass).
                let stiff = v.coulomb / (v.friction_eps * v.mass);
                let substeps = ((stiff * dt / 2.0).ceil() as usize).max(1);
                PlantState::Vcm {
                    p: v.clone(),
                    state: [0.0; 4],
                    delay: DelayLine::new(delay_samples(v.delay, dt)),
                    dt,
                    substeps,
                }
            }
        })
    }

    /// `(gain, offset)` of the next clean output as a function of the next
    /// control input, given the input-side disturbance `d` of that sample.
    pub(crate) fn peek(&self, d: f64) -> (f64, f64) {
        match self {
            PlantState::Linear { filter, delay } => {
                let (g, o) = filter.peek();
                match delay.front() {
                    None => (g, o + g * d),
                    Some(ud) => (0.0, g * (ud + d) + o),
                }
            }
            PlantState::Vcm { state, .. } => (0.0, state[0]),
        }
    }

    /// Applies control `u` (delayed internally) plus input-side disturbance
    /// `d`, returning the clean output at the current sample.
    pub(crate) fn commit(&mut self, u: f64, d: f64) -> f64 {
        match self {
            PlantState::Linear { filter, delay } => {
                let ud = delay.push(u);
                filter.commit(ud + d)
            }
            PlantState::Vcm {
                p,
                state,
                delay,
                dt,
                substeps,
            } => {
                let x = state[0];
                let ud = delay.push(u);
                let force = p.input_gain.eval(ud) - p.gravity + d;
                let h = *dt / *substeps as f64;
                for _ in 0..*substeps {
                    *state = rk4(p, *state, force, h);
                }
                x
            }
        }
    }

    #[cfg(test)]
    pub(crate) fn velocity(&self) -> Option<f64> {
        match self {
            PlantState::Vcm { state, .. } => Some(state[1]),
            _ => None,
        }
    }
}

fn vcm_deriv(p: &VcmLike, s: [f64; 4], force: f64) -> [f64; 4] {
    let [x, v, x2, v2] = s;
    let mut f =
        force - (p.viscous + p.back_emf) * v - p.coulomb * sgn_with_stiction(v, p.friction_eps);
    let mut a2 = 0.0;
    if let Some(r) = p.resonance {
        let coupling = r.stiffness * (x - x2) + r.damping * (v - v2);
        f -= coupling;
        a2 = coupling / r.appendage_mass;
    }
    [v, f / p.mass, v2, a2]
}

fn rk4(p: &VcmLike, s: [f64; 4], force: f64, h: f64) -> [f64; 4] {
    let add = |a: [f64; 4], b: [f64; 4], k: f64| -> [f64; 4] {
        [
            a[0] + k * b[0],
            a[1] + k * b[1],
            a[2] + k * b[2],
            a[3] + k * b[3],
        ]
    };
    let k1 = vcm_deriv(p, s, force);
    let k2 = vcm_deriv(p, add(s, k1, h / 2.0), force);
    let k3 = vcm_deriv(p, add(s, k2, h / 2.0), force);
    let k4 = vcm_deriv(p, add(s, k3, h), force);
    let mut out = s;
    for i in 0..4 {
        out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}
