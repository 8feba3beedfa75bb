use serde::{Deserialize, Serialize};

use super::{Campaign, Outcome, Stage, TuneError};
use crate::lti::make_pi;
use crate::sim::PlantSession;

/// One row of the integrator sweep: `T_i`, `ω^c_pi = 1/T_i` and the measured
/// oscillation frequency (0 when none was seen).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub ti: f64,
    pub omega_c_pi: f64,
    pub omega_gc: f64,
    pub oscillating: bool,
    pub experiment: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegratorResult {
    pub ti: f64,
    /// Ultimate integrator time constant that triggered the oscillation.
    pub ti_bar: f64,
    pub omega_gc_bar: f64,
    pub omega_c_pi_bar: f64,
    /// Accepted descent path, strictly decreasing in `T_i`.
    pub sweep_log: Vec<SweepRow>,
    /// Every integrator experiment in execution order, including back-off
    /// probes and the coarse step that was refined.
    pub all_rows: Vec<SweepRow>,
}

/// `T_i = 10 / max(ω̄_gc, ω̄^c_pi)`.
pub fn integrator_time_constant(omega_gc_bar: f64, omega_c_pi_bar: f64) -> f64 {
    10.0 / omega_gc_bar.max(omega_c_pi_bar)
}

fn row(ti: f64, o: &Outcome) -> SweepRow {
    SweepRow {
        ti,
        omega_c_pi: 1.0 / ti,
        omega_gc: o.omega().unwrap_or(0.0),
        oscillating: o.oscillating(),
        experiment: o.index,
    }
}

const MAX_BACKOFF_STEPS: usize = 60;

/// Descends `T_i` with `K_p = k` until the PI loop shows sustained
/// oscillation, coarse first and then refined from one coarse step back.
pub fn tune_integrator<S: PlantSession>(
    c: &mut Campaign<S>,
    k: f64,
) -> Result<IntegratorResult, TuneError> {
    let cfg = c.config().clone();
    let floor = cfg.experiment.dt * 100.0;
    let mut all_rows = Vec::new();
    let mut probe = |c: &mut Campaign<S>, ti: f64| -> Result<(SweepRow, Outcome), TuneError> {
        let o = c.run(Stage::Integrator, &make_pi(k, ti)?, k, Some(ti))?;
        let r = row(ti, &o);
        all_rows.push(r);
        Ok((r, o))
    };

    let mut path: Vec<SweepRow> = Vec::new();
    let mut ti = cfg.ti_start;
    let (mut r, mut o) = probe(c, ti)?;
    // The last oscillating probe below the accepted path.
    let limit: (SweepRow, Outcome);
    if r.oscillating {
        // Start is already at or past the limit: back off upward first.
        let mut prev = (r, o);
        let mut steps = 0;
        loop {
            steps += 1;
            if steps > MAX_BACKOFF_STEPS {
                return Err(TuneError::NoStableIntegrator { ti });
            }
            ti /= cfg.ti_decay;
            (r, o) = probe(c, ti)?;
            if !r.oscillating {
                break;
            }
            prev = (r, o);
        }
        path.push(r);
        limit = prev;
    } else {
        path.push(r);
        loop {
            let next = ti * cfg.ti_decay;
            if next < floor {
                return Err(TuneError::NoOscillationFound { ti: next });
            }
            (r, o) = probe(c, next)?;
            if r.oscillating {
                limit = (r, o);
                break;
            }
            ti = next;
            path.push(r);
        }
    }

    // Refine between the last stable T_i and the coarse limit.
    let mut t = ti;
    let mut fin = None;
    loop {
        t *= cfg.ti_refine;
        if t <= limit.0.ti * (1.0 + 1e-12) {
            break;
        }
        let (r, o) = probe(c, t)?;
        path.push(r);
        if r.oscillating {
            fin = Some((r, o));
            break;
        }
    }
    let (fin_row, fin_out) = match fin {
        Some(f) => f,
        None => {
            path.push(limit.0);
            limit
        }
    };

    let omega_c_pi_bar = 1.0 / fin_row.ti;
    let omega_gc_bar = match fin_out.omega() {
        Some(w) => w,
        None => {
            c.warn(format!(
                "no oscillation period measurable at T_i = {} (run cut short); using 1/T_i only",
                fin_row.ti
            ));
            0.0
        }
    };
    Ok(IntegratorResult {
        ti: integrator_time_constant(omega_gc_bar, omega_c_pi_bar),
        ti_bar: fin_row.ti,
        omega_gc_bar,
        omega_c_pi_bar,
        sweep_log: path,
        all_rows,
    })
}
