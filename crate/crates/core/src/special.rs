//! Special functions needed by the fading model.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Bessel function of the first kind, order zero.
///
/// Evaluated from the integral representation
///
/// ```text
/// J0(x) = 1/pi * integral_0^pi cos(x sin t) dt
/// ```
///
/// with the trapezoidal rule. The integrand is smooth and periodic, so the
/// rule converges geometrically once the node count exceeds about |x|/2;
/// the remainder is bounded by 2|J_2M(x)| for M nodes. Absolute error stays
/// near 1e-15 for |x| <= 100.
pub fn bessel_j0(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::Domain(format!("bessel_j0 needs a finite argument, got {x}")));
    }
    let x = x.abs();
    if x == 0.0 {
        return Ok(1.0);
    }
    let nodes = (x / 2.0).ceil() as usize + 40;
    let h = PI / nodes as f64;
    let sum: f64 = (0..nodes).map(|m| (x * (m as f64 * h).sin()).cos()).sum();
    Ok(sum / nodes as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn origin_is_one() {
        assert_eq!(bessel_j0(0.0).unwrap(), 1.0);
    }

    #[test]
    fn even_function() {
        for x in [0.3, 4.2, 17.0, 88.8] {
            assert_eq!(bessel_j0(x).unwrap(), bessel_j0(-x).unwrap());
        }
    }

    #[test]
    fn rejects_non_finite() {
        assert!(matches!(bessel_j0(f64::NAN), Err(Error::Domain(_))));
        assert!(matches!(bessel_j0(f64::INFINITY), Err(Error::Domain(_))));
    }
}
