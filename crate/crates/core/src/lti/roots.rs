//! Polynomial root finding via balanced companion-matrix eigenvalues.
//!
//! Roots at the origin are split off exactly (trailing zero coefficients),
//! degrees one and two use closed forms, and everything above goes through
//! the eigenvalues of the companion matrix followed by Newton polishing on
//! the original polynomial. Degrees above [`MAX_ROOT_DEGREE`] are rejected:
//! the companion route loses accuracy quickly past that point.

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::poly;
use super::LtiError;

pub const MAX_ROOT_DEGREE: usize = 10;

pub fn roots(coeffs: &[f64]) -> Result<Vec<Complex64>, LtiError> {
    let p = poly::trim(coeffs);
    let degree = p.len() - 1;
    if degree > MAX_ROOT_DEGREE {
        return Err(LtiError::DegreeTooHigh { degree });
    }
    if poly::is_zero(&p) {
        return Err(LtiError::ZeroPolynomial);
    }
    let origin = poly::origin_multiplicity(&p);
    let reduced = &p[..p.len() - origin];
    let mut out = vec![Complex64::new(0.0, 0.0); origin];
    out.extend(nonzero_roots(reduced));
    Ok(out)
}

/// Roots of a polynomial whose constant term is nonzero.
fn nonzero_roots(p: &[f64]) -> Vec<Complex64> {
    let n = p.len() - 1;
    match n {
        0 => Vec::new(),
        1 => vec![Complex64::new(-p[1] / p[0], 0.0)],
        2 => quadratic(p[0], p[1], p[2]),
        _ => {
            let lead = p[0];
            let mut m = DMatrix::<f64>::zeros(n, n);
            for j in 0..n {
                m[(0, j)] = -p[j + 1] / lead;
            }
            for i in 1..n {
                m[(i, i - 1)] = 1.0;
            }
            balance(&mut m);
            m.complex_eigenvalues()
                .iter()
                .map(|z| polish(p, Complex64::new(z.re, z.im)))
                .collect()
        }
    }
}

fn quadratic(a: f64, b: f64, c: f64) -> Vec<Complex64> {
    let disc = b * b - 4.0 * a * c;
    if disc >= 0.0 {
        let sq = disc.sqrt();
        // Avoid cancellation: compute the larger-magnitude root first.
        let q = -0.5 * (b + b.signum() * sq);
        let (r1, r2) = if q == 0.0 { (0.0, 0.0) } else { (q / a, c / q) };
        vec![Complex64::new(r1, 0.0), Complex64::new(r2, 0.0)]
    } else {
        let re = -b / (2.0 * a);
        let im = (-disc).sqrt() / (2.0 * a.abs());
        vec![Complex64::new(re, im), Complex64::new(re, -im)]
    }
}

/// Parlett–Reinsch diagonal balancing with radix-2 scaling.
fn balance(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    let radix = 2.0_f64;
    let sqrdx = radix * radix;
    loop {
        let mut done = true;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += m[(j, i)].abs();
                    r += m[(i, j)].abs();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut g = r / radix;
            let mut f = 1.0;
            while c < g {
                f *= radix;
                c *= sqrdx;
            }
            g = r * radix;
            while c > g {
                f /= radix;
                c /= sqrdx;
            }
            if (c + r) / f < 0.95 * s {
                done = false;
                let g = 1.0 / f;
                for j in 0..n {
                    m[(i, j)] *= g;
                }
                for j in 0..n {
                    m[(j, i)] *= f;
                }
            }
        }
        if done {
            break;
        }
    }
}

fn polish(p: &[f64], mut z: Complex64) -> Complex64 {
    let dp = poly::derivative(p);
    let mut best = poly::eval(p, z).norm();
    for _ in 0..8 {
        let d = poly::eval(&dp, z);
        if d.norm() == 0.0 {
            break;
        }
        let step = poly::eval(p, z) / d;
        let cand = z - step;
        let val = poly::eval(p, cand).norm();
        if !(val < best) {
            break;
        }
        best = val;
        z = cand;
    }
    z
}
