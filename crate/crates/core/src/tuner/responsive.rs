use super::{Campaign, Stage, TuneError};
use crate::analysis::rise_time;
use crate::lti::TransferFunction;
use crate::sim::PlantSession;

/// Escalates a pure proportional gain until the loop reaches the configured
/// fraction of `x_ref` in time without oscillating.
pub fn find_responsive_gain<S: PlantSession>(c: &mut Campaign<S>) -> Result<f64, TuneError> {
    let ks = c.config().k_search;
    let x_ref = c.config().experiment.x_ref;
    let horizon = c.config().experiment.t_end;
    let deadline = ks.rise_time.unwrap_or(horizon);
    let mut k = ks.k_start;
    let probe = |c: &mut Campaign<S>, k: f64| -> Result<(bool, bool), TuneError> {
        let o = c.run(Stage::ResponsiveGain, &TransferFunction::gain(k), k, None)?;
        let responsive = !o.cut_short()
            && rise_time(&o.trace, x_ref, ks.rise_fraction).is_some_and(|t| t <= deadline);
        Ok((responsive, o.oscillating()))
    };
    while k <= ks.k_max * (1.0 + 1e-12) {
        let (responsive, oscillating) = probe(c, k)?;
        if oscillating {
            // Responsive or not, the next decade would only be worse; give
            // the half-decade below one chance.
            let k2 = k / ks.k_factor.sqrt();
            if k2 >= ks.k_start {
                let (r2, o2) = probe(c, k2)?;
                if r2 && !o2 {
                    return Ok(k2);
                }
            }
            return Err(TuneError::UnstablePlant { k });
        }
        if responsive {
            return Ok(k);
        }
        k *= ks.k_factor;
    }
    Err(TuneError::Unresponsive { k_max: ks.k_max })
}
