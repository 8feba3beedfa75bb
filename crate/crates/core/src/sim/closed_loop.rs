use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::discrete::DiscreteFilter;
use super::plant::{PlantSpec, PlantState};
use super::scenario::ScenarioSpec;
use super::trace::Trace;
use super::SimError;
use crate::lti::TransferFunction;

/// Clamped Gaussian measurement noise; one continuing stream.
#[derive(Debug, Clone)]
pub struct NoiseSource {
    rng: ChaCha8Rng,
    sigma: f64,
}

impl NoiseSource {
    pub fn new(seed: u64, sigma: f64) -> NoiseSource {
        NoiseSource {
            rng: ChaCha8Rng::seed_from_u64(seed),
            sigma,
        }
    }

    pub fn sample(&mut self) -> f64 {
        if self.sigma == 0.0 {
            return 0.0;
        }
        let z: f64 = Normal::new(0.0, 1.0).unwrap().sample(&mut self.rng);
        self.sigma * z.clamp(-4.0, 4.0)
    }
}

/// Runs one closed-loop step experiment with a fresh noise stream seeded
/// from `plant.seed`.
pub fn simulate_closed_loop(
    plant: &PlantSpec,
    controller: &TransferFunction,
    scenario: &ScenarioSpec,
) -> Result<Trace, SimError> {
    let mut noise = NoiseSource::new(plant.seed, plant.noise_sigma);
    simulate_with_noise(plant, controller, scenario, &mut noise)
}

pub(crate) fn simulate_with_noise(
    plant: &PlantSpec,
    controller: &TransferFunction,
    scenario: &ScenarioSpec,
    noise: &mut NoiseSource,
) -> Result<Trace, SimError> {
    plant.validate()?;
    scenario.validate()?;
    if controller.dead_time() > 0.0 {
        return Err(SimError::InvalidController(
            "controller dead time is not supported".into(),
        ));
    }
    let dt = scenario.dt;
    let mut ctl = DiscreteFilter::new(controller, dt)?;
    let mut state = PlantState::new(&plant.model, dt)?;
    let n = scenario.n_samples();
    let mut tr = Trace::with_capacity(0.0, dt, n);
    let x_ref = scenario.x_ref;
    let limit = if x_ref == 0.0 { 1e6 } else { 1e6 * x_ref.abs() };
    let abort = scenario.abort_amplitude.map(|a| a * x_ref.abs());
    let ff = scenario.gravity_feedforward;
    for i in 0..n {
        let t = i as f64 * dt;
        let d = scenario.disturbance_at(t);
        let w = noise.sample();
        let (pg, po) = state.peek(d);
        let (cg, co) = ctl.peek();
        // u = cg·(r - (pg·u + po + w)) + co + ff
        let u = (cg * (x_ref - po - w) + co + ff) / (1.0 + cg * pg);
        let x_clean = pg * u + po;
        let x = x_clean + w;
        if !x.is_finite() || !u.is_finite() {
            tr.diverged = true;
            break;
        }
        ctl.commit(x_ref - x);
        state.commit(u, d);
        tr.r.push(x_ref);
        tr.u.push(u);
        tr.x.push(x);
        tr.d.push(d);
        tr.x_clean.as_mut().unwrap().push(x_clean);
        if x_clean.abs() > limit {
            tr.diverged = true;
            break;
        }
        if let Some(a) = abort {
            if (x - x_ref).abs() > a {
                tr.aborted = true;
                break;
            }
        }
    }
    Ok(tr)
}
