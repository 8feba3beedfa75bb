use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{poly, roots, LtiError};

/// Rational transfer function `num(s)/den(s) · exp(-s·dead_time)`.
///
/// Coefficients are stored densely in descending powers of `s`, exactly as
/// given (leading zeros trimmed, no scaling and no pole-zero cancellation).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTransferFunction", into = "RawTransferFunction")]
pub struct TransferFunction {
    num: Vec<f64>,
    den: Vec<f64>,
    dead_time: f64,
}

#[derive(Serialize, Deserialize)]
struct RawTransferFunction {
    num: Vec<f64>,
    den: Vec<f64>,
    #[serde(default)]
    dead_time: f64,
}

impl TryFrom<RawTransferFunction> for TransferFunction {
    type Error = LtiError;

    fn try_from(raw: RawTransferFunction) -> Result<Self, Self::Error> {
        TransferFunction::new(raw.num, raw.den)?.with_dead_time(raw.dead_time)
    }
}

impl From<TransferFunction> for RawTransferFunction {
    fn from(tf: TransferFunction) -> Self {
        RawTransferFunction {
            num: tf.num,
            den: tf.den,
            dead_time: tf.dead_time,
        }
    }
}

impl TransferFunction {
    pub fn new(num: impl Into<Vec<f64>>, den: impl Into<Vec<f64>>) -> Result<Self, LtiError> {
        let num = num.into();
        let den = den.into();
        if num.is_empty() || den.is_empty() {
            return Err(LtiError::EmptyPolynomial);
        }
        if num.iter().chain(den.iter()).any(|c| !c.is_finite()) {
            return Err(LtiError::NonFinite);
        }
        let den = poly::trim(&den);
        if poly::is_zero(&den) {
            return Err(LtiError::ZeroDenominator);
        }
        Ok(TransferFunction {
            num: poly::trim(&num),
            den,
            dead_time: 0.0,
        })
    }

    pub fn with_dead_time(mut self, dead_time: f64) -> Result<Self, LtiError> {
        if !dead_time.is_finite() || dead_time < 0.0 {
            return Err(LtiError::InvalidDeadTime(dead_time));
        }
        self.dead_time = dead_time;
        Ok(self)
    }

    /// Static gain `k`.
    pub fn gain(k: f64) -> Self {
        TransferFunction {
            num: vec![k],
            den: vec![1.0],
            dead_time: 0.0,
        }
    }

    /// Pure integrator `1/s`.
    pub fn integrator() -> Self {
        TransferFunction {
            num: vec![1.0],
            den: vec![1.0, 0.0],
            dead_time: 0.0,
        }
    }

    pub fn num(&self) -> &[f64] {
        &self.num
    }

    pub fn den(&self) -> &[f64] {
        &self.den
    }

    pub fn dead_time(&self) -> f64 {
        self.dead_time
    }

    pub fn num_degree(&self) -> usize {
        self.num.len() - 1
    }

    pub fn den_degree(&self) -> usize {
        self.den.len() - 1
    }

    pub fn is_proper(&self) -> bool {
        poly::is_zero(&self.num) || self.num_degree() <= self.den_degree()
    }

    /// Multiplicity of the pole at `s = 0`.
    pub fn integrator_count(&self) -> usize {
        poly::origin_multiplicity(&self.den)
    }

    /// Series connection: numerators and denominators are convolved and the
    /// dead times add up. Common factors are kept.
    pub fn series(&self, other: &TransferFunction) -> TransferFunction {
        TransferFunction {
            num: poly::trim(&poly::mul(&self.num, &other.num)),
            den: poly::trim(&poly::mul(&self.den, &other.den)),
            dead_time: self.dead_time + other.dead_time,
        }
    }

    /// Closes a rational loop with unity negative feedback: `L/(1+L)`.
    pub fn unity_feedback(&self) -> Result<TransferFunction, LtiError> {
        if self.dead_time > 0.0 {
            return Err(LtiError::DelayNotClosable);
        }
        let den = poly::trim(&poly::add(&self.den, &self.num));
        if poly::is_zero(&den) {
            return Err(LtiError::ZeroDenominator);
        }
        let n = self.num.len().max(self.den.len());
        let mut num = vec![0.0; n - self.num.len()];
        num.extend_from_slice(&self.num);
        Ok(TransferFunction {
            num: poly::trim(&num),
            den,
            dead_time: 0.0,
        })
    }

    /// `num(jω)/den(jω) · exp(-jω·dead_time)`.
    pub fn freq_response(&self, omega: f64) -> Result<Complex64, LtiError> {
        if !(omega > 0.0) || !omega.is_finite() {
            return Err(LtiError::InvalidFrequency(omega));
        }
        let s = Complex64::new(0.0, omega);
        let d = poly::eval(&self.den, s);
        if d.norm() < 1e-300 {
            return Err(LtiError::PoleOnAxis { omega });
        }
        let delay = Complex64::from_polar(1.0, -omega * self.dead_time);
        Ok(poly::eval(&self.num, s) / d * delay)
    }

    /// Value at `s = 0` when finite (no pole at the origin).
    pub fn dc_gain(&self) -> Option<f64> {
        let d = *self.den.last().unwrap();
        if d == 0.0 {
            return None;
        }
        Some(*self.num.last().unwrap() / d)
    }

    /// Roots of the denominator.
    pub fn poles(&self) -> Result<Vec<Complex64>, LtiError> {
        if self.den_degree() == 0 {
            return Err(LtiError::DegreeZero);
        }
        roots::roots(&self.den)
    }

    /// Roots of the numerator (empty for a constant numerator).
    pub fn zeros(&self) -> Result<Vec<Complex64>, LtiError> {
        if poly::is_zero(&self.num) {
            return Ok(Vec::new());
        }
        roots::roots(&self.num)
    }
}

impl fmt::Display for TransferFunction {
    /// Renders e.g. `(139.5 s + 450)/(0.31 s)`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({})/({})",
            format_poly(&self.num),
            format_poly(&self.den)
        )?;
        if self.dead_time > 0.0 {
            write!(f, " exp(-{} s)", format_coeff(self.dead_time))?;
        }
        Ok(())
    }
}

pub fn format_coeff(c: f64) -> String {
    let s = format!("{:.6}", c);
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

fn format_poly(p: &[f64]) -> String {
    let n = p.len() - 1;
    let mut out = String::new();
    for (i, c) in p.iter().enumerate() {
        if *c == 0.0 && !(n == 0) {
            continue;
        }
        let power = n - i;
        let mag = format_coeff(c.abs());
        if out.is_empty() {
            if *c < 0.0 {
                out.push('-');
            }
        } else {
            out.push_str(if *c < 0.0 { " - " } else { " + " });
        }
        match power {
            0 => out.push_str(&mag),
            1 => out.push_str(&format!("{mag} s")),
            _ => out.push_str(&format!("{mag} s^{power}")),
        }
    }
    if out.is_empty() {
        out.push('0');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_zero_denominator_and_negative_delay() {
        assert!(matches!(
            TransferFunction::new([1.0], [0.0, 0.0]),
            Err(LtiError::ZeroDenominator)
        ));
        assert!(TransferFunction::gain(1.0).with_dead_time(-1.0).is_err());
        assert!(TransferFunction::new([f64::NAN], [1.0]).is_err());
    }

    #[test]
    fn display_matches_textbook_layout() {
        let c = TransferFunction::new([139.5, 450.0], [0.31, 0.0]).unwrap();
        assert_eq!(c.to_string(), "(139.5 s + 450)/(0.31 s)");
        let l = TransferFunction::new([0.031, 1.0], [0.0031, 1.0]).unwrap();
        assert_eq!(l.to_string(), "(0.031 s + 1)/(0.0031 s + 1)");
    }

    #[test]
    fn unity_feedback_requires_rational_loop() {
        let l = TransferFunction::integrator().with_dead_time(0.01).unwrap();
        assert!(matches!(
            l.unity_feedback(),
            Err(LtiError::DelayNotClosable)
        ));
    }

    #[test]
    fn poles_of_constant_denominator_is_error() {
        assert!(matches!(
            TransferFunction::gain(2.0).poles(),
            Err(LtiError::DegreeZero)
        ));
    }

    #[test]
    fn serde_roundtrip_validates() {
        let json = r#"{"num":[1.0],"den":[1.0,0.0],"dead_time":0.005}"#;
        let tf: TransferFunction = serde_json::from_str(json).unwrap();
        assert_eq!(tf.dead_time(), 0.005);
        assert!(serde_json::from_str::<TransferFunction>(r#"{"num":[1],"den":[0]}"#).is_err());
    }
}
