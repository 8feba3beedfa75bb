use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::filters::{median_filter, moving_mean};
use super::step::MEDIAN_WINDOW;
use super::AnalysisError;
use crate::sim::Trace;

pub const MIN_WINDOW_SAMPLES: usize = 64;

/// Decision thresholds of the sustained-oscillation detector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SustainedThresholds {
    pub transient_skip: f64,
    pub min_peaks: usize,
    pub ratio_low: f64,
    pub ratio_high: f64,
    /// Extremum prominence in units of the estimated noise sigma.
    pub noise_factor: f64,
    /// Prominence floor relative to the detrended signal range.
    pub relative_floor: f64,
    /// Largest coefficient of variation of the full-period spacings.
    pub max_spacing_cv: f64,
    /// Smallest peak-to-peak swing over the largest, for a sustained verdict.
    pub min_swing_spread: f64,
}

impl Default for SustainedThresholds {
    fn default() -> Self {
        SustainedThresholds {
            transient_skip: 0.3,
            min_peaks: 4,
            ratio_low: 0.8,
            ratio_high: 1.25,
            noise_factor: 5.0,
            relative_floor: 1e-3,
            max_spacing_cv: 0.25,
            min_swing_spread: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OscillationVerdict {
    pub sustained: bool,
    /// Amplitude grows past the upper ratio threshold.
    pub diverging: bool,
    pub period: Option<f64>,
    pub omega: Option<f64>,
    /// Peak-to-peak swing of the last extremum pair over the first.
    pub amplitude_ratio: f64,
    pub n_peaks: usize,
    pub noise_sigma: f64,
}

impl OscillationVerdict {
    /// Sustained or growing: the loop is at or beyond its stability limit.
    pub fn at_limit(&self) -> bool {
        self.sustained || self.diverging
    }
}

pub fn detect_sustained(
    trace: &Trace,
    transient_skip: f64,
) -> Result<OscillationVerdict, AnalysisError> {
    let th = SustainedThresholds {
        transient_skip,
        ..SustainedThresholds::default()
    };
    detect_sustained_with(trace, &th)
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_unstable_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Alternating extrema with hysteresis `h`. The first extremum is dropped if
/// it sits on the window edge; the trailing unconfirmed one never enters.
fn zigzag(x: &[f64], h: f64) -> Vec<(usize, f64)> {
    let mut out = Vec::new();
    let (mut hi, mut lo) = ((0usize, x[0]), (0usize, x[0]));
    let mut dir = 0i8;
    for (i, &v) in x.iter().enumerate() {
        match dir {
            0 => {
                if v > hi.1 {
                    hi = (i, v);
                }
                if v < lo.1 {
                    lo = (i, v);
                }
                if v - lo.1 > h {
                    out.push(lo);
                    dir = 1;
                    hi = (i, v);
                } else if hi.1 - v > h {
                    out.push(hi);
                    dir = -1;
                    lo = (i, v);
                }
            }
            1 => {
                if v > hi.1 {
                    hi = (i, v);
                } else if hi.1 - v > h {
                    out.push(hi);
                    dir = -1;
                    lo = (i, v);
                }
            }
            _ => {
                if v < lo.1 {
                    lo = (i, v);
                } else if v - lo.1 > h {
                    out.push(lo);
                    dir = 1;
                    hi = (i, v);
                }
            }
        }
    }
    if out.first().is_some_and(|e| e.0 == 0) {
        out.remove(0);
    }
    out
}

fn mean_spacing(idx: &[usize]) -> Option<f64> {
    (idx.len() >= 2).then(|| (idx[idx.len() - 1] - idx[0]) as f64 / (idx.len() - 1) as f64)
}

fn spacing_cv(maxi: &[usize], mini: &[usize]) -> f64 {
    let d: Vec<f64> = maxi
        .windows(2)
        .chain(mini.windows(2))
        .map(|w| (w[1] - w[0]) as f64)
        .collect();
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    var.sqrt() / mean
}

fn extreme(v: &[f64], better: impl Fn(f64, f64) -> bool) -> (usize, f64) {
    let mut best = (0, v[0]);
    for (i, &x) in v.iter().enumerate().skip(1) {
        if better(x, best.1) {
            best = (i, x);
        }
    }
    best
}

pub fn detect_sustained_with(
    trace: &Trace,
    th: &SustainedThresholds,
) -> Result<OscillationVerdict, AnalysisError> {
    if !(0.0..1.0).contains(&th.transient_skip) {
        return Err(AnalysisError::OutOfRange {
            value: th.transient_skip,
            range: "[0, 1)",
        });
    }
    let n = trace.len();
    let skip = (th.transient_skip * n as f64).floor() as usize;
    let raw = &trace.x[skip.min(n)..];
    if raw.len() < MIN_WINDOW_SAMPLES {
        return Err(AnalysisError::TooShort {
            got: raw.len(),
            need: MIN_WINDOW_SAMPLES,
        });
    }
    let mut diffs: Vec<f64> = raw.windows(2).map(|w| w[1] - w[0]).collect();
    let md = median(&mut diffs.clone());
    for d in diffs.iter_mut() {
        *d = (*d - md).abs();
    }
    let noise_sigma = 1.4826 * median(&mut diffs) / 2f64.sqrt();

    let filtered = median_filter(raw, MEDIAN_WINDOW);
    let trend = moving_mean(&filtered, (filtered.len() / 4).max(1));
    let y: Vec<f64> = filtered.iter().zip(&trend).map(|(a, b)| a - b).collect();
    let (ymin, ymax) = y
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
            (a.min(*v), b.max(*v))
        });
    let range = ymax - ymin;
    let h = (th.noise_factor * noise_sigma).max(th.relative_floor * range);

    let ext = if range > 0.0 {
        zigzag(&y, h)
    } else {
        Vec::new()
    };
    let n_peaks = ext.len();
    let mut verdict = OscillationVerdict {
        sustained: false,
        diverging: false,
        period: None,
        omega: None,
        amplitude_ratio: 0.0,
        n_peaks,
        noise_sigma,
    };
    if n_peaks < th.min_peaks.max(4) {
        return Ok(verdict);
    }
    let first = (ext[1].1 - ext[0].1).abs();
    let last = (ext[n_peaks - 1].1 - ext[n_peaks - 2].1).abs();
    let ratio = last / first;
    // Extrema alternate, so parity decides which are maxima.
    let first_is_max = ext[0].1 > ext[1].1;
    let (mut maxi, mut mini) = (Vec::new(), Vec::new());
    for (j, e) in ext.iter().enumerate() {
        if (j % 2 == 0) == first_is_max {
            maxi.push(e.0);
        } else {
            mini.push(e.0);
        }
    }
    let (s1, s2) = (mean_spacing(&maxi), mean_spacing(&mini));
    let spacing = match (s1, s2) {
        (Some(a), Some(b)) => {
            let (wa, wb) = ((maxi.len() - 1) as f64, (mini.len() - 1) as f64);
            (a * wa + b * wb) / (wa + wb)
        }
        (Some(a), None) | (None, Some(a)) => a,
        (None, None) => unreachable!("four alternating extrema give two of each sign"),
    };
    let period = spacing * trace.dt;
    verdict.amplitude_ratio = ratio;
    verdict.period = Some(period);
    verdict.omega = Some(2.0 * PI / period);

    // Noise wandering produces extrema too, but neither evenly spaced nor
    // with a consistent swing.
    if spacing_cv(&maxi, &mini) > th.max_spacing_cv {
        return Ok(verdict);
    }
    let swings: Vec<f64> = ext.windows(2).map(|w| (w[1].1 - w[0].1).abs()).collect();
    let (i_lo, s_lo) = extreme(&swings, |a, b| a < b);
    let (i_hi, s_hi) = extreme(&swings, |a, b| a > b);
    verdict.sustained =
        (th.ratio_low..=th.ratio_high).contains(&ratio) && s_lo >= th.min_swing_spread * s_hi;
    let half = swings.len() / 2;
    verdict.diverging = ratio > th.ratio_high && i_lo < half && i_hi >= half;
    Ok(verdict)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace_of(x: Vec<f64>, dt: f64) -> Trace {
        let n = x.len();
        Trace {
            t0: 0.0,
            dt,
            r: vec![0.0; n],
            u: vec![0.0; n],
            x,
            d: vec![0.0; n],
            x_clean: None,
            diverged: false,
            aborted: false,
        }
    }

    #[test]
    fn pure_tone_is_sustained_with_its_period() {
        let dt = 1e-3;
        let x = (0..10_000)
            .map(|i| (10.0 * i as f64 * dt).sin() + 3.0)
            .collect();
        let v = detect_sustained(&trace_of(x, dt), 0.3).unwrap();
        assert!(v.sustained && !v.diverging, "{v:?}");
        let p = v.period.unwrap();
        assert!((p - 2.0 * PI / 10.0).abs() < 2e-3, "{p}");
        assert!((v.omega.unwrap() * p - 2.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn decaying_tone_is_not_sustained() {
        let dt = 1e-3;
        let x = (0..10_000)
            .map(|i| {
                let t = i as f64 * dt;
                (-t).exp() * (10.0 * t).sin()
            })
            .collect();
        let v = detect_sustained(&trace_of(x, dt), 0.3).unwrap();
        assert!(!v.sustained && !v.diverging, "{v:?}");
        assert!(v.amplitude_ratio < 0.8);
    }

    #[test]
    fn growing_tone_is_diverging() {
        let dt = 1e-3;
        let x = (0..10_000)
            .map(|i| {
                let t = i as f64 * dt;
                (0.2 * t).exp() * (10.0 * t).sin()
            })
            .collect();
        let v = detect_sustained(&trace_of(x, dt), 0.3).unwrap();
        assert!(v.diverging && !v.sustained, "{v:?}");
    }

    #[test]
    fn filtered_random_walk_is_not_an_oscillation() {
        use rand::{Rng, SeedableRng};
        let dt = 1e-4;
        for seed in 0..20u64 {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut w = 0.0;
            let x = (0..70_000)
                .map(|_| {
                    w = 0.9995 * w + 1e-5 * (rng.random::<f64>() - 0.5);
                    w + 5e-5 * (rng.random::<f64>() - 0.5)
                })
                .collect();
            let v = detect_sustained(&trace_of(x, dt), 0.3).unwrap();
            assert!(!v.at_limit(), "seed {seed}: {v:?}");
        }
    }

    #[test]
    fn too_short_window() {
        let x = vec![0.0; 80];
        assert!(matches!(
            detect_sustained(&trace_of(x, 1e-3), 0.3),
            Err(AnalysisError::TooShort { .. })
        ));
    }

    #[test]
    fn flat_or_ramp_signal_has_no_peaks() {
        let x: Vec<f64> = (0..5000).map(|i| i as f64 * 1e-3).collect();
        let v = detect_sustained(&trace_of(x, 1e-3), 0.3).unwrap();
        assert!(!v.sustained && v.period.is_none());
    }
}
