use super::closed_loop::{simulate_with_noise, NoiseSource};
use super::plant::PlantSpec;
use super::scenario::ScenarioSpec;
use super::trace::Trace;
use super::{SessionError, SimError};
use crate::lti::TransferFunction;

/// An opaque plant that can only be driven through closed-loop step
/// experiments. This is the whole surface the tuner sees.
pub trait PlantSession {
    fn run(
        &mut self,
        controller: &TransferFunction,
        scenario: &ScenarioSpec,
    ) -> Result<Trace, SessionError>;

    /// Returns the plant to its initial state and rewinds the noise stream.
    fn reset(&mut self) -> Result<(), SessionError>;
}

impl<S: PlantSession + ?Sized> PlantSession for &mut S {
    fn run(
        &mut self,
        controller: &TransferFunction,
        scenario: &ScenarioSpec,
    ) -> Result<Trace, SessionError> {
        (**self).run(controller, scenario)
    }

    fn reset(&mut self) -> Result<(), SessionError> {
        (**self).reset()
    }
}

impl<S: PlantSession + ?Sized> PlantSession for Box<S> {
    fn run(
        &mut self,
        controller: &TransferFunction,
        scenario: &ScenarioSpec,
    ) -> Result<Trace, SessionError> {
        (**self).run(controller, scenario)
    }

    fn reset(&mut self) -> Result<(), SessionError> {
        (**self).reset()
    }
}

/// Local simulated plant. Each run starts from rest; measurement noise is one
/// continuing seeded stream across runs until [`PlantSession::reset`].
///
/// The plant description stays private:
///
/// ```compile_fail
/// use std::collections::BTreeMap;
/// use ut_core::sim::{catalog, make_session};
/// let s = make_session(catalog("vcm_like", &BTreeMap::new()).unwrap()).unwrap();
/// let _ = s.plant.noise_sigma;
/// ```
#[derive(Debug, Clone)]
pub struct SimulatedSession {
    plant: PlantSpec,
    noise: NoiseSource,
}

pub fn make_session(plant: PlantSpec) -> Result<SimulatedSession, SimError> {
    plant.validate()?;
    let noise = NoiseSource::new(plant.seed, plant.noise_sigma);
    Ok(SimulatedSession { plant, noise })
}

impl PlantSession for SimulatedSession {
    fn run(
        &mut self,
        controller: &TransferFunction,
        scenario: &ScenarioSpec,
    ) -> Result<Trace, SessionError> {
        Ok(simulate_with_noise(
            &self.plant,
            controller,
            scenario,
            &mut self.noise,
        )?)
    }

    fn reset(&mut self) -> Result<(), SessionError> {
        self.noise = NoiseSource::new(self.plant.seed, self.plant.noise_sigma);
        Ok(())
    }
}
