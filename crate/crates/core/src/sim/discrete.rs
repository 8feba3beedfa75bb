//! Tustin discretization and sample-delay lines.
//!
//! [`discretize`] returns the textbook direct-form difference equation. The
//! simulator runs [`DiscreteFilter`] instead: the same mapping applied to a
//! cascade of first- and second-order sections built from the poles and
//! zeros, which stays well conditioned for wide-band controllers such as a
//! PID with a kilohertz roll-off at 10 kHz sampling.

use std::collections::VecDeque;

use num_complex::Complex64;

use crate::lti::{poly, LtiError, TransferFunction};

/// Normalized difference equation `Σ a_k y[n-k] = Σ b_k u[n-k]`, `a[0] = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct DifferenceEquation {
    pub b: Vec<f64>,
    pub a: Vec<f64>,
    /// Dead time as a whole number of samples.
    pub delay_samples: usize,
}

impl DifferenceEquation {
    /// Gain at `z = 1`.
    pub fn dc_gain(&self) -> f64 {
        self.b.iter().sum::<f64>() / self.a.iter().sum::<f64>()
    }
}

pub fn delay_samples(dead_time: f64, dt: f64) -> usize {
    (dead_time / dt).round() as usize
}

fn check_dt(dt: f64) -> Result<(), LtiError> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(LtiError::InvalidParameter(format!(
            "dt must be > 0, got {dt}"
        )));
    }
    Ok(())
}

/// Substitutes `s = c (1 - q) / (1 + q)` with `q = z^-1` into a polynomial of
/// nominal order `n` (coefficients descending, padded to length `n + 1`) and
/// multiplies through by `(1 + q)^n`. Returns coefficients in powers of `q`.
fn tustin_poly(p: &[f64], n: usize, c: f64) -> Vec<f64> {
    let mut padded = vec![0.0; n + 1 - p.len()];
    padded.extend_from_slice(p);
    let mut out = vec![0.0; n + 1];
    for (i, coef) in padded.iter().enumerate() {
        let k = n - i;
        // c^k (1 - q)^k (1 + q)^(n - k)
        let mut term = vec![c.powi(k as i32) * coef];
        for _ in 0..k {
            term = poly_mul_asc(&term, &[1.0, -1.0]);
        }
        for _ in 0..n - k {
            term = poly_mul_asc(&term, &[1.0, 1.0]);
        }
        for (j, t) in term.iter().enumerate() {
            out[j] += t;
        }
    }
    out
}

fn poly_mul_asc(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Bilinear (Tustin) discretization `s ← (2/dt)(z-1)/(z+1)`.
pub fn discretize(tf: &TransferFunction, dt: f64) -> Result<DifferenceEquation, LtiError> {
    check_dt(dt)?;
    if !tf.is_proper() {
        return Err(LtiError::ImproperTf);
    }
    let n = tf.den_degree();
    let c = 2.0 / dt;
    let b = tustin_poly(tf.num(), n, c);
    let a = tustin_poly(tf.den(), n, c);
    let a0 = a[0];
    Ok(DifferenceEquation {
        b: b.iter().map(|x| x / a0).collect(),
        a: a.iter().map(|x| x / a0).collect(),
        delay_samples: delay_samples(tf.dead_time(), dt),
    })
}

/// One Tustin-mapped section of order 1 or 2 in transposed direct form II.
#[derive(Debug, Clone)]
struct Section {
    b: [f64; 3],
    a: [f64; 3],
    s: [f64; 2],
}

impl Section {
    fn new(num: &[f64], den: &[f64], dt: f64) -> Section {
        let n = den.len() - 1;
        let c = 2.0 / dt;
        let bq = tustin_poly(num, n, c);
        let aq = tustin_poly(den, n, c);
        let mut b = [0.0; 3];
        let mut a = [0.0; 3];
        for i in 0..=n {
            b[i] = bq[i] / aq[0];
            a[i] = aq[i] / aq[0];
        }
        Section { b, a, s: [0.0; 2] }
    }

    fn peek(&self, gain: f64, offset: f64) -> (f64, f64) {
        (self.b[0] * gain, self.b[0] * offset + self.s[0])
    }

    fn commit(&mut self, x: f64) -> f64 {
        let y = self.b[0] * x + self.s[0];
        self.s[0] = self.b[1] * x - self.a[1] * y + self.s[1];
        self.s[1] = self.b[2] * x - self.a[2] * y;
        y
    }
}

/// Groups roots into real polynomials of order at most two: conjugate pairs
/// first, then real roots paired up, with at most one first-order remainder.
fn group_roots(roots: &[Complex64]) -> Vec<Vec<f64>> {
    let tol = 1e-9;
    let mut complex: Vec<Complex64> = roots
        .iter()
        .copied()
        .filter(|r| r.im > tol * r.norm().max(1.0))
        .collect();
    complex.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    let mut reals: Vec<f64> = roots
        .iter()
        .filter(|r| r.im.abs() <= tol * r.norm().max(1.0))
        .map(|r| r.re)
        .collect();
    reals.sort_by(f64::total_cmp);
    let mut out: Vec<Vec<f64>> = complex
        .iter()
        .map(|r| vec![1.0, -2.0 * r.re, r.norm_sqr()])
        .collect();
    for pair in reals.chunks(2) {
        match pair {
            [p, q] => out.push(vec![1.0, -(p + q), p * q]),
            [p] => out.push(vec![1.0, -p]),
            _ => unreachable!(),
        }
    }
    out
}

/// Cascade realization of a proper transfer function, with an affine view of
/// the current output so algebraic loops can be solved exactly.
#[derive(Debug, Clone)]
pub struct DiscreteFilter {
    gain: f64,
    sections: Vec<Section>,
}

impl DiscreteFilter {
    pub fn new(tf: &TransferFunction, dt: f64) -> Result<DiscreteFilter, LtiError> {
        check_dt(dt)?;
        if !tf.is_proper() {
            return Err(LtiError::ImproperTf);
        }
        if poly::is_zero(tf.num()) {
            return Ok(DiscreteFilter {
                gain: 0.0,
                sections: Vec::new(),
            });
        }
        let gain = tf.num()[0] / tf.den()[0];
        let zeros = group_roots(&tf.zeros()?);
        let poles = if tf.den_degree() == 0 {
            Vec::new()
        } else {
            group_roots(&tf.poles()?)
        };
        // Pair zero groups with pole groups so each section is proper.
        let mut assigned: Vec<Option<Vec<f64>>> = vec![None; poles.len()];
        let mut zq: Vec<Vec<f64>> = zeros;
        zq.sort_by_key(|z| std::cmp::Reverse(z.len()));
        for z in zq {
            let slot = (0..poles.len())
                .filter(|&i| assigned[i].is_none() && poles[i].len() >= z.len())
                .max_by_key(|&i| (poles[i].len() == z.len(), std::cmp::Reverse(i)))
                .ok_or(LtiError::ImproperTf)?;
            assigned[slot] = Some(z);
        }
        let sections = poles
            .iter()
            .zip(assigned)
            .map(|(p, z)| Section::new(&z.unwrap_or_else(|| vec![1.0]), p, dt))
            .collect();
        Ok(DiscreteFilter { gain, sections })
    }

    /// Output for the next input `x` as `gain·x + offset`, without advancing.
    pub fn peek(&self) -> (f64, f64) {
        let (mut g, mut o) = (1.0, 0.0);
        for s in &self.sections {
            (g, o) = s.peek(g, o);
        }
        (self.gain * g, self.gain * o)
    }

    /// Feeds `x`, advances the state and returns the output.
    pub fn commit(&mut self, x: f64) -> f64 {
        let mut v = x;
        for s in &mut self.sections {
            v = s.commit(v);
        }
        self.gain * v
    }

    pub fn reset(&mut self) {
        for s in &mut self.sections {
            s.s = [0.0; 2];
        }
    }
}

/// Fixed-length FIFO delay of whole samples, initially filled with zeros.
#[derive(Debug, Clone)]
pub struct DelayLine {
    buf: VecDeque<f64>,
}

impl DelayLine {
    pub fn new(samples: usize) -> DelayLine {
        DelayLine {
            buf: std::iter::repeat(0.0).take(samples).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    /// The sample the next `push` will return, or `None` for a zero delay.
    pub fn front(&self) -> Option<f64> {
        self.buf.front().copied()
    }

    /// Pushes `x` and returns the sample from `len()` steps ago.
    pub fn push(&mut self, x: f64) -> f64 {
        if self.buf.is_empty() {
            return x;
        }
        self.buf.push_back(x);
        self.buf.pop_front().unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_direct(eq: &DifferenceEquation, u: &[f64]) -> Vec<f64> {
        let mut y: Vec<f64> = Vec::with_capacity(u.len());
        for n in 0..u.len() {
            let mut acc = 0.0;
            for (k, b) in eq.b.iter().enumerate() {
                if n >= k {
                    acc += b * u[n - k];
                }
            }
            for (k, a) in eq.a.iter().enumerate().skip(1) {
                if n >= k {
                    acc -= a * y[n - k];
                }
            }
            y.push(acc);
        }
        y
    }

    #[test]
    fn integrator_is_trapezoidal() {
        let dt = 0.01;
        let eq = discretize(&TransferFunction::integrator(), dt).unwrap();
        assert!((eq.b[0] - dt / 2.0).abs() < 1e-15 && (eq.b[1] - dt / 2.0).abs() < 1e-15);
        assert_eq!(eq.a, vec![1.0, -1.0]);
    }

    #[test]
    fn static_gain_passes_through() {
        let eq = discretize(&TransferFunction::gain(1.0), 0.1).unwrap();
        assert_eq!(eq.b, vec![1.0]);
        assert_eq!(eq.a, vec![1.0]);
    }

    #[test]
    fn first_order_keeps_unit_dc_gain() {
        let tf = TransferFunction::new([1.0], [1.0, 1.0]).unwrap();
        let eq = discretize(&tf, 0.1).unwrap();
        assert!((eq.dc_gain() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn improper_is_rejected() {
        let tf = TransferFunction::new([1.0, 0.0], [1.0]).unwrap();
        assert!(matches!(discretize(&tf, 0.1), Err(LtiError::ImproperTf)));
        assert!(DiscreteFilter::new(&tf, 0.1).is_err());
    }

    #[test]
    fn cascade_matches_direct_form() {
        let tf = TransferFunction::new([2.0, 3.0, 1.0], [1.0, 4.0, 9.0, 10.0, 0.0]).unwrap();
        let dt = 1e-2;
        let eq = discretize(&tf, dt).unwrap();
        let mut f = DiscreteFilter::new(&tf, dt).unwrap();
        let u: Vec<f64> = (0..400).map(|i| ((i as f64) * 0.07).sin()).collect();
        let direct = run_direct(&eq, &u);
        for (i, x) in u.iter().enumerate() {
            let (g, o) = f.peek();
            let y = f.commit(*x);
            assert!((g * x + o - y).abs() < 1e-12);
            assert!(
                (y - direct[i]).abs() < 1e-9 * (1.0 + direct[i].abs()),
                "{i}"
            );
        }
    }

    #[test]
    fn delay_line_shifts_by_length() {
        let mut d = DelayLine::new(2);
        let out: Vec<f64> = [1.0, 2.0, 3.0, 4.0].iter().map(|x| d.push(*x)).collect();
        assert_eq!(out, vec![0.0, 0.0, 1.0, 2.0]);
        assert_eq!(DelayLine::new(0).push(5.0), 5.0);
        assert_eq!(delay_samples(0.005, 1e-4), 50);
    }
}
