//! Frequency-domain analysis: continuous phase, Bode sampling and the gain
//! crossover / phase margin search.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{poly, LtiError, TransferFunction};

/// One Bode sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyPoint {
    pub omega: f64,
    pub magnitude_db: f64,
    pub phase_deg: f64,
}

/// Result of the gain crossover search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginReport {
    /// Lowest-frequency gain crossover, rad/s (NaN when not found).
    pub omega_gc: f64,
    /// `180 + ∠L(jω_gc)` in degrees (NaN when not found).
    pub phase_margin_deg: f64,
    pub crossover_found: bool,
    /// Number of crossovers detected on the search grid.
    pub crossover_count: usize,
}

impl MarginReport {
    fn not_found() -> Self {
        MarginReport {
            omega_gc: f64::NAN,
            phase_margin_deg: f64::NAN,
            crossover_found: false,
            crossover_count: 0,
        }
    }

    pub fn phase_margin(&self) -> Option<f64> {
        self.crossover_found.then_some(self.phase_margin_deg)
    }
}

pub const MARGIN_GRID_POINTS: usize = 512;

/// Evaluates the unwrapped (continuous in ω) phase of a transfer function.
///
/// The phase is the sum of the angles of `jω - r` over numerator roots minus
/// the same over denominator roots, plus the sign of the leading-coefficient
/// ratio and the dead-time lag. Each factor angle is continuous for ω > 0:
/// the principal branch is used except for right half-plane roots with
/// positive imaginary part, which take the `[-270°, -90°]` branch. A
/// conjugate RHP pair then contributes zero at DC.
#[derive(Debug, Clone)]
pub struct PhaseTracker {
    num_roots: Vec<Complex64>,
    den_roots: Vec<Complex64>,
    base_deg: f64,
    dead_time: f64,
}

impl PhaseTracker {
    pub fn new(tf: &TransferFunction) -> Result<Self, LtiError> {
        if poly::is_zero(tf.num()) {
            return Err(LtiError::ZeroPolynomial);
        }
        let num_roots = tf.zeros()?;
        let den_roots = if tf.den_degree() == 0 {
            Vec::new()
        } else {
            tf.poles()?
        };
        let ratio = tf.num()[0] / tf.den()[0];
        let base_deg = if ratio < 0.0 { -180.0 } else { 0.0 };
        Ok(PhaseTracker {
            num_roots,
            den_roots,
            base_deg,
            dead_time: tf.dead_time(),
        })
    }

    pub fn phase_deg(&self, omega: f64) -> f64 {
        let s = Complex64::new(0.0, omega);
        let sum = |rs: &[Complex64]| rs.iter().map(|r| factor_angle(s, *r)).sum::<f64>();
        let rad = sum(&self.num_roots) - sum(&self.den_roots) - omega * self.dead_time;
        self.base_deg + rad.to_degrees()
    }
}

fn factor_angle(s: Complex64, r: Complex64) -> f64 {
    let z = s - r;
    if z.re == 0.0 && z.im == 0.0 {
        return 0.0;
    }
    let a = z.im.atan2(z.re);
    // An RHP root above the real axis is passed by jω; keep its angle on the
    // branch that is continuous through that crossing.
    if r.re > 0.0 && r.im > 0.0 && a > 0.0 {
        a - 2.0 * PI
    } else {
        a
    }
}

/// Continuous phase of `tf` at `omega`, degrees.
pub fn phase_deg(tf: &TransferFunction, omega: f64) -> Result<f64, LtiError> {
    if !(omega > 0.0) {
        return Err(LtiError::InvalidFrequency(omega));
    }
    Ok(PhaseTracker::new(tf)?.phase_deg(omega))
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

fn check_band(lo: f64, hi: f64) -> Result<(), LtiError> {
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(LtiError::InvalidBand { lo, hi });
    }
    Ok(())
}

/// Bode samples over `[lo, hi]` on a log grid of at least 512 points. Where
/// two adjacent samples differ by more than 90° in phase the interval is
/// subdivided (x4, repeatedly) so resonances and delay lag stay resolved.
pub fn bode(
    tf: &TransferFunction,
    lo: f64,
    hi: f64,
    points: usize,
) -> Result<Vec<FrequencyPoint>, LtiError> {
    check_band(lo, hi)?;
    let tracker = PhaseTracker::new(tf)?;
    let sample = |w: f64| -> Result<FrequencyPoint, LtiError> {
        let h = tf.freq_response(w)?;
        Ok(FrequencyPoint {
            omega: w,
            magnitude_db: 20.0 * h.norm().log10(),
            phase_deg: tracker.phase_deg(w),
        })
    };
    let grid = log_grid(lo, hi, points.max(MARGIN_GRID_POINTS));
    let mut out = Vec::with_capacity(grid.len());
    out.push(sample(grid[0])?);
    for w in grid.windows(2) {
        let next = sample(w[1])?;
        let prev = *out.last().unwrap();
        if (next.phase_deg - prev.phase_deg).abs() > 90.0 {
            densify(&sample, prev, next, 0, &mut out)?;
        }
        out.push(next);
    }
    Ok(out)
}

fn densify<F>(
    sample: &F,
    a: FrequencyPoint,
    b: FrequencyPoint,
    depth: usize,
    out: &mut Vec<FrequencyPoint>,
) -> Result<(), LtiError>
where
    F: Fn(f64) -> Result<FrequencyPoint, LtiError>,
{
    let mids: Vec<f64> = log_grid(a.omega, b.omega, 5)[1..4].to_vec();
    let mut prev = a;
    for w in mids.into_iter().chain(std::iter::once(b.omega)) {
        let p = if w == b.omega { b } else { sample(w)? };
        if depth < 6 && (p.phase_deg - prev.phase_deg).abs() > 90.0 {
            densify(sample, prev, p, depth + 1, out)?;
        }
        if w != b.omega {
            out.push(p);
        }
        prev = p;
    }
    Ok(())
}

/// Gain crossover frequency and phase margin of the open loop `l`.
///
/// `|L(jω)| - 1` is sampled on a 512-point log grid over `[lo, hi]`; each
/// sign change is refined by bisection in log-frequency to 1e-6 relative
/// width. The lowest crossover is reported along with the total count.
pub fn margins(l: &TransferFunction, lo: f64, hi: f64) -> Result<MarginReport, LtiError> {
    check_band(lo, hi)?;
    let log_mag = |w: f64| -> Result<f64, LtiError> { Ok(l.freq_response(w)?.norm().ln()) };
    let grid = log_grid(lo, hi, MARGIN_GRID_POINTS);
    let mut mags = Vec::with_capacity(grid.len());
    for w in &grid {
        mags.push(log_mag(*w)?);
    }
    let mut crossings = Vec::new();
    for i in 0..grid.len() - 1 {
        let (a, b) = (mags[i], mags[i + 1]);
        if a == 0.0 || ((a > 0.0) != (b > 0.0) && b != 0.0) {
            crossings.push(i);
        }
    }
    if mags[grid.len() - 1] == 0.0 {
        crossings.push(grid.len() - 1);
    }
    let Some(&first) = crossings.first() else {
        return Ok(MarginReport::not_found());
    };
    let omega_gc = if mags[first] == 0.0 {
        grid[first]
    } else {
        let (mut a, mut b) = (grid[first], grid[first + 1]);
        let mut fa = mags[first];
        while (b - a) / a > 1e-6 {
            let m = (a * b).sqrt();
            let fm = log_mag(m)?;
            if fm == 0.0 {
                a = m;
                b = m;
                break;
            }
            if (fm > 0.0) == (fa > 0.0) {
                a = m;
                fa = fm;
            } else {
                b = m;
            }
        }
        // Pick the end with smaller |log|L||.
        if log_mag(a)?.abs() <= log_mag(b)?.abs() {
            a
        } else {
            b
        }
    };
    let tracker = PhaseTracker::new(l)?;
    Ok(MarginReport {
        omega_gc,
        phase_margin_deg: 180.0 + tracker.phase_deg(omega_gc),
        crossover_found: true,
        crossover_count: crossings.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrator_phase_is_minus_ninety() {
        let p = phase_deg(&TransferFunction::integrator(), 3.0).unwrap();
        assert!((p + 90.0).abs() < 1e-12);
    }

    #[test]
    fn rhp_pole_phase_is_continuous_through_its_frequency() {
        // 1/(s^2 - 2s + 101): RHP pair at 1 ± 10j
        let tf = TransferFunction::new([1.0], [1.0, -2.0, 101.0]).unwrap();
        let t = PhaseTracker::new(&tf).unwrap();
        let mut prev = t.phase_deg(0.01);
        let mut w: f64 = 0.01;
        while w < 1000.0 {
            w *= 1.01;
            let p = t.phase_deg(w);
            assert!((p - prev).abs() < 20.0, "jump at {w}: {prev} -> {p}");
            prev = p;
        }
        // Two RHP poles contribute +180 at high frequency in total.
        assert!((prev - 180.0).abs() < 1.0, "{prev}");
    }

    #[test]
    fn bode_densifies_across_lightly_damped_resonance() {
        let tf = TransferFunction::new([1.0], [1.0, 0.0002, 1.0]).unwrap();
        let pts = bode(&tf, 0.1, 10.0, 512).unwrap();
        assert!(pts.len() >= 512);
        for w in pts.windows(2) {
            assert!(w[1].omega > w[0].omega);
            assert!((w[1].phase_deg - w[0].phase_deg).abs() < 180.0);
        }
    }

    #[test]
    fn margins_without_crossover() {
        let tf = TransferFunction::new([0.1], [1.0, 1.0]).unwrap();
        let m = margins(&tf, 0.01, 100.0).unwrap();
        assert!(!m.crossover_found);
        assert!(m.phase_margin().is_none());
    }

    #[test]
    fn margins_rejects_bad_band() {
        let tf = TransferFunction::integrator();
        assert!(margins(&tf, 10.0, 1.0).is_err());
        assert!(margins(&tf, 0.0, 1.0).is_err());
    }
}
