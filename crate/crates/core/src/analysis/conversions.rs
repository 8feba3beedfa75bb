use std::f64::consts::PI;

use super::AnalysisError;

/// Step overshoot of a conjugate pole pair, `exp(-πζ/√(1-ζ²))`.
pub fn overshoot_from_zeta(zeta: f64) -> Result<f64, AnalysisError> {
    if !(0.0..1.0).contains(&zeta) {
        return Err(AnalysisError::OutOfRange {
            value: zeta,
            range: "[0, 1)",
        });
    }
    Ok((-PI * zeta / (1.0 - zeta * zeta).sqrt()).exp())
}

/// Inverse of [`overshoot_from_zeta`]: `ζ = -ln M / √(π² + ln² M)`.
pub fn zeta_from_overshoot(m: f64) -> Result<f64, AnalysisError> {
    if !(m > 0.0 && m < 1.0) {
        return Err(AnalysisError::OutOfRange {
            value: m,
            range: "(0, 1)",
        });
    }
    let l = m.ln();
    Ok(-l / (PI * PI + l * l).sqrt())
}

/// Phase margin in degrees of the loop `ω_n²/(s(s+2ζω_n))`:
/// `atan(2ζ / √(√(1+4ζ⁴) - 2ζ²))`.
pub fn phase_margin_from_zeta(zeta: f64) -> Result<f64, AnalysisError> {
    if !(zeta > 0.0 && zeta < 1.0) {
        return Err(AnalysisError::OutOfRange {
            value: zeta,
            range: "(0, 1)",
        });
    }
    let z2 = zeta * zeta;
    let inner = (1.0 + 4.0 * z2 * z2).sqrt() - 2.0 * z2;
    Ok((2.0 * zeta / inner.sqrt()).atan().to_degrees())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_out_of_range() {
        assert!(zeta_from_overshoot(0.0).is_err());
        assert!(zeta_from_overshoot(1.0).is_err());
        assert!(phase_margin_from_zeta(1.0).is_err());
        assert!(overshoot_from_zeta(-0.1).is_err());
    }

    #[test]
    fn limits() {
        assert!(zeta_from_overshoot(1.0 - 1e-12).unwrap() < 1e-6);
        assert!(phase_margin_from_zeta(1e-9).unwrap() < 1e-6);
        assert_eq!(overshoot_from_zeta(0.0).unwrap(), 1.0);
    }
}
