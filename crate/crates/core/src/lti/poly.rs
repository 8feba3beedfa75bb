//! Dense real polynomials stored as coefficient lists in descending powers.

use num_complex::Complex64;

/// Drops leading zero coefficients, keeping at least one entry.
pub fn trim(coeffs: &[f64]) -> Vec<f64> {
    let first = coeffs.iter().position(|c| *c != 0.0);
    match first {
        Some(i) => coeffs[i..].to_vec(),
        None => vec![0.0],
    }
}

pub fn degree(coeffs: &[f64]) -> usize {
    trim(coeffs).len() - 1
}

pub fn is_zero(coeffs: &[f64]) -> bool {
    coeffs.iter().all(|c| *c == 0.0)
}

/// Polynomial product (full convolution).
pub fn mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return vec![0.0];
    }
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Polynomial sum with the lists aligned at the constant term.
pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = a.len().max(b.len());
    let mut out = vec![0.0; n];
    for (k, x) in a.iter().rev().enumerate() {
        out[n - 1 - k] += x;
    }
    for (k, y) in b.iter().rev().enumerate() {
        out[n - 1 - k] += y;
    }
    out
}

pub fn scale(a: &[f64], k: f64) -> Vec<f64> {
    a.iter().map(|c| c * k).collect()
}

/// Horner evaluation at a complex point.
pub fn eval(coeffs: &[f64], s: Complex64) -> Complex64 {
    coeffs
        .iter()
        .fold(Complex64::new(0.0, 0.0), |acc, c| acc * s + c)
}

pub fn eval_real(coeffs: &[f64], s: f64) -> f64 {
    coeffs.iter().fold(0.0, |acc, c| acc * s + c)
}

/// Derivative coefficients, descending powers.
pub fn derivative(coeffs: &[f64]) -> Vec<f64> {
    let n = coeffs.len();
    if n <= 1 {
        return vec![0.0];
    }
    coeffs[..n - 1]
        .iter()
        .enumerate()
        .map(|(i, c)| c * (n - 1 - i) as f64)
        .collect()
}

/// Number of exact zero coefficients at the constant end, i.e. the
/// multiplicity of the root at the origin.
pub fn origin_multiplicity(coeffs: &[f64]) -> usize {
    let t = trim(coeffs);
    if is_zero(&t) {
        return 0;
    }
    t.iter().rev().take_while(|c| **c == 0.0).count()
}

/// Builds the monic polynomial with the given roots (descending powers).
/// Complex roots must come in conjugate pairs for a real result; the
/// imaginary residue is discarded.
pub fn from_roots(roots: &[Complex64]) -> Vec<f64> {
    let mut acc = vec![Complex64::new(1.0, 0.0)];
    for r in roots {
        let mut next = vec![Complex64::new(0.0, 0.0); acc.len() + 1];
        for (i, c) in acc.iter().enumerate() {
            next[i] += c;
            next[i + 1] -= c * r;
        }
        acc = next;
    }
    acc.into_iter().map(|c| c.re).collect()
}
