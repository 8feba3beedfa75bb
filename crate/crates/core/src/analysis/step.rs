use serde::{Deserialize, Serialize};

use super::filters::median_filter;
use super::AnalysisError;
use crate::sim::Trace;

pub const MEDIAN_WINDOW: usize = 11;
pub const SETTLING_BAND: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepMetrics {
    /// `(max x - x_ref)/x_ref`, clamped at zero.
    pub overshoot_m: f64,
    /// Time of the peak, measured from the step onset.
    pub peak_time: f64,
    /// Time from onset until `x` stays within 2% of `x_ref`; `None` if the
    /// record ends outside the band.
    pub settling_time_2pct: Option<f64>,
    /// `x_ref` minus the mean of the last 5% of the filtered output.
    pub steady_state_error: f64,
}

fn onset(trace: &Trace) -> usize {
    trace.u.iter().position(|u| *u != 0.0).unwrap_or(0)
}

/// Step-response metrics on the median-filtered output.
pub fn overshoot(trace: &Trace, x_ref: f64) -> Result<StepMetrics, AnalysisError> {
    if x_ref == 0.0 || !x_ref.is_finite() {
        return Err(AnalysisError::InvalidArgument(
            "x_ref must be finite and nonzero".into(),
        ));
    }
    let n = trace.len();
    if n < 2 {
        return Err(AnalysisError::TooShort { got: n, need: 2 });
    }
    let xf = median_filter(&trace.x, MEDIAN_WINDOW);
    let start = onset(trace);
    let sign = x_ref.signum();
    let scale = x_ref.abs();
    let (mut ipk, mut best) = (start, f64::NEG_INFINITY);
    for (i, v) in xf.iter().enumerate().skip(start) {
        let e = sign * (v - x_ref) / scale;
        if e > best {
            best = e;
            ipk = i;
        }
    }
    let band = SETTLING_BAND * scale;
    let last_out = (start..n).rev().find(|&i| (xf[i] - x_ref).abs() > band);
    let settling = match last_out {
        None => Some(0.0),
        Some(i) if i == n - 1 => None,
        Some(i) => Some((i + 1 - start) as f64 * trace.dt),
    };
    let tail = (n / 20).max(1);
    let mean_tail = xf[n - tail..].iter().sum::<f64>() / tail as f64;
    Ok(StepMetrics {
        overshoot_m: best.max(0.0),
        peak_time: (ipk - start) as f64 * trace.dt,
        settling_time_2pct: settling,
        steady_state_error: x_ref - mean_tail,
    })
}

/// Largest `|x - x_ref|/|x_ref|` of the filtered output once it has first
/// reached `x_ref`: overshoot and any later undershoot. Zero if the output
/// never gets there.
pub fn peak_deviation(trace: &Trace, x_ref: f64) -> Result<f64, AnalysisError> {
    if x_ref == 0.0 || !x_ref.is_finite() {
        return Err(AnalysisError::InvalidArgument(
            "x_ref must be finite and nonzero".into(),
        ));
    }
    let xf = median_filter(&trace.x, MEDIAN_WINDOW);
    let start = onset(trace);
    let sign = x_ref.signum();
    Ok(
        match (start..xf.len()).find(|&i| sign * (xf[i] - x_ref) >= 0.0) {
            None => 0.0,
            Some(i0) => xf[i0..]
                .iter()
                .map(|v| (v - x_ref).abs() / x_ref.abs())
                .fold(0.0, f64::max),
        },
    )
}

/// Time from the step onset until the filtered output first reaches
/// `fraction·x_ref`.
pub fn rise_time(trace: &Trace, x_ref: f64, fraction: f64) -> Option<f64> {
    if x_ref == 0.0 || trace.is_empty() {
        return None;
    }
    let xf = median_filter(&trace.x, MEDIAN_WINDOW);
    let start = onset(trace);
    let goal = fraction * x_ref.abs();
    (start..trace.len())
        .find(|&i| xf[i] * x_ref.signum() >= goal)
        .map(|i| (i - start) as f64 * trace.dt)
}

/// Time after `t_release` until the filtered output enters and stays in the
/// band `|x - x_ref| <= band·|x_ref|`. `None` if the record ends outside.
pub fn recovery_time(
    trace: &Trace,
    x_ref: f64,
    t_release: f64,
    band: f64,
) -> Result<Option<f64>, AnalysisError> {
    if x_ref == 0.0 || !(band > 0.0) {
        return Err(AnalysisError::InvalidArgument(
            "need x_ref != 0 and band > 0".into(),
        ));
    }
    let n = trace.len();
    let k0 = ((t_release - trace.t0) / trace.dt).ceil().max(0.0) as usize;
    if k0 >= n {
        return Err(AnalysisError::InvalidArgument(
            "release time beyond trace".into(),
        ));
    }
    let xf = median_filter(&trace.x, MEDIAN_WINDOW);
    let tol = band * x_ref.abs();
    Ok(match (k0..n).rev().find(|&i| (xf[i] - x_ref).abs() > tol) {
        None => Some(0.0),
        Some(i) if i == n - 1 => None,
        Some(i) => Some(trace.time(i + 1) - t_release),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace_of(x: Vec<f64>, dt: f64) -> Trace {
        let n = x.len();
        Trace {
            t0: 0.0,
            dt,
            r: vec![1.0; n],
            u: vec![1.0; n],
            x,
            d: vec![0.0; n],
            x_clean: None,
            diverged: false,
            aborted: false,
        }
    }

    #[test]
    fn first_order_rise_has_no_overshoot() {
        let dt = 1e-3;
        let x = (0..10_000)
            .map(|i| 1.0 - (-(i as f64) * dt).exp())
            .collect();
        let m = overshoot(&trace_of(x, dt), 1.0).unwrap();
        assert_eq!(m.overshoot_m, 0.0);
        let ts = m.settling_time_2pct.unwrap();
        assert!((ts - 50f64.ln()).abs() < 2e-3, "{ts}");
        assert!(m.steady_state_error.abs() < 1e-3);
    }

    #[test]
    fn peak_deviation_counts_undershoot_after_the_first_crossing() {
        let dt = 1e-3;
        let x: Vec<f64> = (0..2000)
            .map(|i| {
                let t = i as f64 * dt;
                if t < 0.5 {
                    2.0 * t
                } else if t < 1.0 {
                    1.0 + 0.2 * (t - 0.5) * 2.0
                } else {
                    0.6
                }
            })
            .collect();
        let d = peak_deviation(&trace_of(x, dt), 1.0).unwrap();
        assert!((d - 0.4).abs() < 1e-12, "{d}");
        let ramp: Vec<f64> = (0..100).map(|i| i as f64 / 200.0).collect();
        assert_eq!(peak_deviation(&trace_of(ramp, dt), 1.0).unwrap(), 0.0);
    }

    #[test]
    fn record_ending_outside_band_has_no_settling_time() {
        let x = (0..100).map(|i| i as f64 / 200.0).collect();
        let m = overshoot(&trace_of(x, 0.01), 1.0).unwrap();
        assert!(m.settling_time_2pct.is_none());
    }
}
