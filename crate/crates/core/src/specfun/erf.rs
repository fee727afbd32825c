//! Complementary error function and its exponentially scaled form.
//!
//! Small arguments use the all-positive Maclaurin series
//! `erf(z) = 2/√π · e^{-z²} Σ 2ⁿ z^{2n+1} / (2n+1)!!`, which has no
//! cancellation. Larger arguments use the even continued fraction for
//! `e^{z²} erfc(z)`, evaluated with the modified Lentz method.

use std::f64::consts::PI;

use crate::error::{domain, Result};

const FRAC_2_SQRT_PI: f64 = std::f64::consts::FRAC_2_SQRT_PI;
/// Switch point between the series and the continued fraction.
const SERIES_LIMIT: f64 = 1.5;
/// Above this the two-term asymptotic expansion is exact to double precision.
const ASYMPTOTIC_LIMIT: f64 = 1e8;

/// `Σ 2ⁿ z^{2n+1} / (2n+1)!!`, so that `erf(z) = 2/√π · e^{-z²} · sum`.
fn erf_series_sum(z: f64) -> f64 {
    let z2 = z * z;
    let mut term = z;
    let mut sum = z;
    for n in 1..500 {
        term *= 2.0 * z2 / (2 * n + 1) as f64;
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

/// `e^{z²} erfc(z)` for `z ≥ SERIES_LIMIT` by continued fraction.
fn erfcx_cf(z: f64) -> f64 {
    if z > ASYMPTOTIC_LIMIT {
        let r = 1.0 / (z * z);
        return (1.0 - 0.5 * r) / (z * PI.sqrt());
    }
    // erfc(z) e^{z²} = (2z/√π) / (2z²+1 - 1·2/(2z²+5 - 3·4/(2z²+9 - ...)))
    const TINY: f64 = 1e-300;
    let two_z2 = 2.0 * z * z;
    let mut f = two_z2 + 1.0;
    let mut c = f;
    let mut d = 0.0;
    for n in 1..5000 {
        let a = -((2 * n - 1) as f64) * (2 * n) as f64;
        let b = two_z2 + (4 * n + 1) as f64;
        d = b + a * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + a / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    FRAC_2_SQRT_PI * z / f
}

/// Complementary error function `erfc(z) = 2/√π ∫_z^∞ e^{-t²} dt`.
pub fn erfc(z: f64) -> Result<f64> {
    if !z.is_finite() {
        return Err(domain("erfc", format!("non-finite argument {z}")));
    }
    Ok(erfc_unchecked(z))
}

pub(crate) fn erfc_unchecked(z: f64) -> f64 {
    if z < 0.0 {
        return 2.0 - erfc_unchecked(-z);
    }
    if z < 0.5 {
        return 1.0 - FRAC_2_SQRT_PI * (-z * z).exp() * erf_series_sum(z);
    }
    if z > 27.3 {
        return 0.0;
    }
    erfcx_unchecked(z) * (-z * z).exp()
}

/// Scaled complementary error function `e^{z²} erfc(z)` for `z ≥ 0`.
///
/// Stays finite and accurate for arbitrarily large `z`, where it behaves as
/// `1/(z√π)`.
pub fn erfcx(z: f64) -> Result<f64> {
    if !(z >= 0.0) || z.is_infinite() {
        return Err(domain("erfcx", format!("need finite z >= 0, got {z}")));
    }
    Ok(erfcx_unchecked(z))
}

pub(crate) fn erfcx_unchecked(z: f64) -> f64 {
    if z < SERIES_LIMIT {
        (z * z).exp() - FRAC_2_SQRT_PI * erf_series_sum(z)
    } else {
        erfcx_cf(z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn erfc_pinned_values() {
        // 40-digit values from an arbitrary-precision series evaluation.
        assert_eq!(erfc(0.0).unwrap(), 1.0);
        assert!(rel(erfc(1.0).unwrap(), 0.157_299_207_050_285_130_658_779_364_917_390_740_7) < 1e-12);
        assert!(rel(erfc(0.5).unwrap(), 0.479_500_122_186_953_462_317_253_346_108_035_471) < 1e-13);
        assert!(rel(erfc(3.0).unwrap(), 2.209_049_699_858_544_137_277_612_958_232_037_984e-5) < 1e-13);
        assert!(rel(erfc(-1.3).unwrap(), 1.934_007_944_940_652_445_850_185_361_577_595_854) < 1e-14);
        assert!(
            rel(
                erfc(10.0).unwrap(),
                2.088_487_583_762_544_757_000_786_294_957_788_611e-45
            ) < 1e-13
        );
    }

    #[test]
    fn erfcx_pinned_values() {
        assert_eq!(erfcx(0.0).unwrap(), 1.0);
        assert!(rel(erfcx(2.0).unwrap(), 0.255_395_676_310_505_743_865_088_580_908_542_763_3) < 1e-13);
        assert!(rel(erfcx(0.3).unwrap(), 0.734_599_334_567_655_152_366_490_597_636_751_142_9) < 1e-14);
        assert!(
            rel(
                erfcx(30.0).unwrap(),
                0.018_795_888_861_416_751_497_125_329_049_406_209_14
            ) < 1e-13
        );
        let big = erfcx(1e6).unwrap();
        assert!(rel(big, 1.0 / (1e6 * PI.sqrt())) < 1e-9);
        assert!(erfcx(1e200).unwrap() > 0.0);
    }

    #[test]
    fn series_and_fraction_agree_at_the_switch() {
        let z = SERIES_LIMIT;
        let series = (z * z).exp() - FRAC_2_SQRT_PI * erf_series_sum(z);
        assert!(rel(series, erfcx_cf(z)) < 1e-13);
    }

    #[test]
    fn domain_errors() {
        assert!(erfc(f64::NAN).is_err());
        assert!(erfc(f64::INFINITY).is_err());
        assert!(erfcx(-1e-3).is_err());
    }

    #[test]
    fn erfc_is_decreasing_and_bounded() {
        let mut prev = 2.0;
        for i in 0..=1200 {
            let z = -6.0 + i as f64 * 0.01;
            let v = erfc(z).unwrap();
            assert!(v <= prev && (0.0..=2.0).contains(&v), "z={z}");
            prev = v;
        }
    }
}
