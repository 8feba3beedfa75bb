use serde::{Deserialize, Serialize};

use super::{
    find_responsive_gain, Campaign, Outcome, Stage, TuneConfig, TuneError, TuneFailure, TuneLog,
};
use crate::lti::{butterworth_lowpass, make_zn_pid, zn_pid_gains, TransferFunction, ZnPidGains};
use crate::sim::PlantSession;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZnUltimate {
    pub ku: f64,
    pub tu: f64,
    /// Final bracket: stable below, oscillating above.
    pub k_stable: f64,
    pub k_oscillating: f64,
    pub bisections: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZnResult {
    pub ultimate: ZnUltimate,
    pub gains: ZnPidGains,
    pub pid: TransferFunction,
    pub n_experiments: usize,
    /// Carried separately in reports.
    #[serde(skip)]
    pub log: TuneLog,
}

/// Proportional escalation from `k` by the configured factor until the loop
/// oscillates, then bisection of the last stable / oscillating pair. With
/// `filter_in_loop` the proportional gain runs behind the same low-pass the
/// final PID uses.
pub fn zn_ultimate<S: PlantSession>(c: &mut Campaign<S>, k: f64) -> Result<ZnUltimate, TuneError> {
    let zc = c.config().zn;
    let k_max = c.config().k_search.k_max;
    let filter = if zc.filter_in_loop {
        Some(butterworth_lowpass(zc.filter_hz, zc.filter_order)?)
    } else {
        None
    };
    let probe = |c: &mut Campaign<S>, k: f64| -> Result<Outcome, TuneError> {
        let p = TransferFunction::gain(k);
        let ctl = match &filter {
            Some(f) => p.series(f),
            None => p,
        };
        c.run(Stage::Zn, &ctl, k, None)
    };

    let first = probe(c, k)?;
    let (mut lo, mut hi, mut hi_out);
    if first.oscillating() {
        hi = k;
        hi_out = first;
        let mut g = k;
        loop {
            g /= zc.gain_factor;
            if g < k * 1e-6 {
                return Err(TuneError::UnstablePlant { k: g });
            }
            let o = probe(c, g)?;
            if !o.oscillating() {
                lo = g;
                break;
            }
            hi = g;
            hi_out = o;
        }
    } else {
        lo = k;
        let mut g = k;
        loop {
            g *= zc.gain_factor;
            if g > k_max {
                return Err(TuneError::NoOscillation { k_max });
            }
            let o = probe(c, g)?;
            if o.oscillating() {
                hi = g;
                hi_out = o;
                break;
            }
            lo = g;
        }
    }

    let mut bisections = 0;
    while (hi - lo) / hi > zc.rel_width && bisections < zc.max_bisections {
        let mid = 0.5 * (lo + hi);
        let o = probe(c, mid)?;
        bisections += 1;
        if o.oscillating() {
            hi = mid;
            hi_out = o;
        } else {
            lo = mid;
        }
    }

    let ku = 0.5 * (lo + hi);
    let at_ku = probe(c, ku)?;
    let tu = at_ku
        .verdict
        .and_then(|v| v.period)
        .or(hi_out.verdict.and_then(|v| v.period));
    let tu = match tu {
        Some(t) => t,
        None => {
            let any = c
                .log()
                .experiments
                .iter()
                .rev()
                .filter(|e| e.stage == Stage::Zn)
                .find_map(|e| e.verdict.and_then(|v| v.period));
            match any {
                Some(t) => {
                    c.warn(format!(
                        "no period at K_u = {ku}; using the nearest recorded one"
                    ));
                    t
                }
                None => return Err(TuneError::NoOscillation { k_max: hi }),
            }
        }
    };
    Ok(ZnUltimate {
        ku,
        tu,
        k_stable: lo,
        k_oscillating: hi,
        bisections,
    })
}

/// Ultimate-sensitivity PID baseline starting from a responsive gain search.
pub fn zn_pid<S: PlantSession>(session: S, cfg: &TuneConfig) -> Result<ZnResult, TuneFailure> {
    run(session, cfg, None)
}

/// Same as [`zn_pid`] but escalating from a known responsive gain `k`.
pub fn zn_pid_with_k<S: PlantSession>(
    session: S,
    cfg: &TuneConfig,
    k: f64,
) -> Result<ZnResult, TuneFailure> {
    run(session, cfg, Some(k))
}

fn run<S: PlantSession>(
    session: S,
    cfg: &TuneConfig,
    k: Option<f64>,
) -> Result<ZnResult, TuneFailure> {
    let mut c = Campaign::new(session, cfg.clone()).map_err(|error| TuneFailure {
        error,
        log: TuneLog::default(),
    })?;
    let res = (|| {
        let k = match k {
            Some(k) => k,
            None => find_responsive_gain(&mut c)?,
        };
        let ultimate = zn_ultimate(&mut c, k)?;
        let gains = zn_pid_gains(ultimate.ku, ultimate.tu)?;
        let pid = make_zn_pid(
            ultimate.ku,
            ultimate.tu,
            cfg.zn.filter_hz,
            cfg.zn.filter_order,
        )?;
        Ok::<_, TuneError>((ultimate, gains, pid))
    })();
    let (_, log) = c.into_parts();
    match res {
        Ok((ultimate, gains, pid)) => Ok(ZnResult {
            ultimate,
            gains,
            pid,
            n_experiments: log.experiments.len(),
            log,
        }),
        Err(error) => Err(TuneFailure { error, log }),
    }
}
