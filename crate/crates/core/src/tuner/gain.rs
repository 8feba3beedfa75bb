use serde::{Deserialize, Serialize};

use super::{Campaign, Outcome, Stage, TuneError};
use crate::lti::make_pi;
use crate::sim::PlantSession;

/// One evaluated gain multiplier. `m` is infinite for runs that were cut
/// short or ended at the stability limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainPoint {
    pub delta: f64,
    pub kp: f64,
    #[serde(with = "inf_as_null")]
    pub m: f64,
    pub bisection: bool,
    pub experiment: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainResult {
    pub kp: f64,
    #[serde(with = "inf_as_null")]
    pub m: f64,
    /// Points in evaluation order.
    pub points: Vec<GainPoint>,
    pub band_unreachable: bool,
}

pub(crate) mod inf_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

const MAX_EXTENSION: i32 = 12;

fn score(o: &Outcome) -> f64 {
    if o.oscillating() {
        f64::INFINITY
    } else {
        o.overshoot()
    }
}

struct Grid {
    n_up: i32,
    n_down: i32,
    step_up: f64,
    step_down: f64,
}

impl Grid {
    fn new(delta_min: f64, delta_max: f64, points: usize) -> Grid {
        let n_down = ((points - 1) / 2) as i32;
        let n_up = (points - 1) as i32 - n_down;
        Grid {
            n_up,
            n_down,
            step_up: delta_max.log10() / n_up as f64,
            step_down: -delta_min.log10() / n_down.max(1) as f64,
        }
    }

    fn log_delta(&self, j: i32) -> f64 {
        if j >= 0 {
            j as f64 * self.step_up
        } else {
            j as f64 * self.step_down
        }
    }
}

/// Scales `K_p = δ·k` over a log grid, ascending from `δ = 1` and then
/// descending, and bisects a bracketing pair until the step overshoot lies
/// in the configured band.
pub fn tune_gain<S: PlantSession>(
    c: &mut Campaign<S>,
    k: f64,
    ti: f64,
) -> Result<GainResult, TuneError> {
    let cfg = c.config().clone();
    let [lo, hi] = cfg.m_band;
    let in_band = |m: f64| m >= lo && m <= hi;
    let g = &cfg.kp_grid;
    let grid = Grid::new(g.delta_min, g.delta_max, g.points);

    let mut points: Vec<GainPoint> = Vec::new();
    let mut eval = |c: &mut Campaign<S>, points: &mut Vec<GainPoint>, ld: f64, bisection: bool| {
        let delta = 10f64.powf(ld);
        let kp = k * delta;
        let o = c.run(Stage::Gain, &make_pi(kp, ti)?, kp, Some(ti))?;
        let m = score(&o);
        points.push(GainPoint {
            delta,
            kp,
            m,
            bisection,
            experiment: o.index,
        });
        Ok::<f64, TuneError>(m)
    };

    let m0 = eval(c, &mut points, 0.0, false)?;
    let mut found = in_band(m0);

    if !found {
        let mut prev = m0;
        let mut j = 1;
        loop {
            let extension = j - grid.n_up;
            if extension > 0 && (prev >= lo || extension > MAX_EXTENSION) {
                break;
            }
            let m = eval(c, &mut points, grid.log_delta(j), false)?;
            if in_band(m) {
                found = true;
                break;
            }
            if m > hi && m > prev {
                break;
            }
            prev = m;
            j += 1;
        }
    }
    if !found {
        let mut prev = m0;
        for j in (-grid.n_down..0).rev() {
            let m = eval(c, &mut points, grid.log_delta(j), false)?;
            if in_band(m) {
                found = true;
                break;
            }
            if (m < lo && m < prev) || (m > hi && m > prev) {
                break;
            }
            prev = m;
        }
    }

    if !found {
        found = bisect(c, &mut points, &mut eval, g.max_bisections, lo, hi)?;
    }

    let pick = if found {
        let (i_min, _) = points
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.m.total_cmp(&b.1.m))
            .expect("at least one point");
        let d_min = points[i_min].delta;
        points
            .iter()
            .filter(|p| in_band(p.m))
            .min_by(|a, b| {
                let side = |p: &GainPoint| if p.delta >= d_min { 0 } else { 1 };
                side(a)
                    .cmp(&side(b))
                    .then(
                        (a.m - cfg.m_target)
                            .abs()
                            .total_cmp(&(b.m - cfg.m_target).abs()),
                    )
                    .then(b.delta.total_cmp(&a.delta))
            })
            .copied()
            .expect("an in-band point")
    } else {
        let best = points
            .iter()
            .min_by(|a, b| {
                (a.m - cfg.m_target)
                    .abs()
                    .total_cmp(&(b.m - cfg.m_target).abs())
                    .then(b.delta.total_cmp(&a.delta))
            })
            .copied()
            .expect("at least one point");
        c.warn(format!(
            "overshoot band [{lo}, {hi}] unreachable; using K_p = {} with M = {}",
            best.kp, best.m
        ));
        best
    };

    Ok(GainResult {
        kp: pick.kp,
        m: pick.m,
        points,
        band_unreachable: !found,
    })
}

/// Bisects in log δ, first a bracket where M rises through the band, then
/// one where it falls.
fn bisect<S: PlantSession>(
    c: &mut Campaign<S>,
    points: &mut Vec<GainPoint>,
    eval: &mut impl FnMut(&mut Campaign<S>, &mut Vec<GainPoint>, f64, bool) -> Result<f64, TuneError>,
    max: usize,
    lo: f64,
    hi: f64,
) -> Result<bool, TuneError> {
    let mut seen: Vec<(f64, f64)> = points.iter().map(|p| (p.delta.log10(), p.m)).collect();
    seen.sort_by(|a, b| a.0.total_cmp(&b.0));
    let pairs: Vec<((f64, f64), (f64, f64))> = seen.windows(2).map(|w| (w[0], w[1])).collect();
    let rising = pairs.iter().find(|(a, b)| a.1 < lo && b.1 > hi);
    let falling = pairs.iter().rev().find(|(a, b)| a.1 > hi && b.1 < lo);
    for &(a, b) in rising.into_iter().chain(falling) {
        let (mut below, mut above) = if a.1 < lo { (a.0, b.0) } else { (b.0, a.0) };
        for _ in 0..max {
            let mid = 0.5 * (below + above);
            let m = eval(c, points, mid, true)?;
            if m >= lo && m <= hi {
                return Ok(true);
            }
            if m < lo {
                below = mid;
            } else {
                above = mid;
            }
        }
    }
    Ok(false)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_hits_the_endpoints_and_one() {
        let g = Grid::new(0.1, 10.0, 25);
        assert_eq!(g.log_delta(0), 0.0);
        assert!((g.log_delta(g.n_up) - 1.0).abs() < 1e-12);
        assert!((g.log_delta(-g.n_down) + 1.0).abs() < 1e-12);
        assert_eq!(g.n_up + g.n_down + 1, 25);
    }
}
