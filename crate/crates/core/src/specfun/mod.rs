//! Special functions and quadrature used by the analytic modules.

mod erf;
mod expint;
mod gamma;
mod marcum;
mod quad;

pub use erf::{erfc, erfcx};
pub use expint::{exp_integral_ei, neg_exp_scaled_ei};
pub use gamma::{gamma_pq, gamma_q, ln_gamma};
pub use marcum::{marcum_q, marcum_q_inv_b};
pub use quad::{integrate, QuadratureSpec};

pub(crate) use erf::erfcx_unchecked;

use crate::error::{domain, Result};

/// Echo kernel `K(b, c) = 2∫₀^∞ exp(−t/b − c·t²) dt`.
///
/// For `c > 0` this is `√(π/c)·erfcx(1/(2b√c))`, which tends to `2b` as
/// `c → 0⁺` and stays finite for every `c ≥ 0`.
pub fn echo_kernel(b: f64, c: f64) -> Result<f64> {
    if !(b > 0.0) || !b.is_finite() {
        return Err(domain("echo_kernel", format!("need finite b > 0, got {b}")));
    }
    if !(c >= 0.0) {
        return Err(domain("echo_kernel", format!("need c >= 0, got {c}")));
    }
    Ok(echo_kernel_unchecked(b, c))
}

pub(crate) fn echo_kernel_unchecked(b: f64, c: f64) -> f64 {
    if c == 0.0 {
        return 2.0 * b;
    }
    if c.is_infinite() {
        return 0.0;
    }
    let sc = c.sqrt();
    let z = 1.0 / (2.0 * b * sc);
    if z.is_infinite() {
        return 2.0 * b;
    }
    (std::f64::consts::PI / c).sqrt() * erfcx_unchecked(z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn kernel_by_quadrature(b: f64, c: f64) -> f64 {
        let spec = QuadratureSpec::new(1e-14, 1e-12, 5000).unwrap();
        2.0 * integrate(|t| (-t / b - c * t * t).exp(), 0.0, f64::INFINITY, &spec).unwrap()
    }

    #[test]
    fn kernel_trivial_cases() {
        assert_eq!(echo_kernel(1.0, 0.0).unwrap(), 2.0);
        assert!(echo_kernel(0.0, 1.0).is_err());
        assert!(echo_kernel(-1.0, 1.0).is_err());
        assert!(echo_kernel(1.0, -1e-3).is_err());
    }

    #[test]
    fn kernel_matches_quadrature() {
        for (b, c) in [(0.5, 0.1), (2.0, 3.0), (10.0, 1e-4)] {
            let k = echo_kernel(b, c).unwrap();
            let q = kernel_by_quadrature(b, c);
            assert!(((k - q) / q).abs() < 1e-9, "b={b} c={c}: {k} vs {q}");
        }
    }

    #[test]
    fn kernel_small_c_limit() {
        for &b in &[0.01, 0.3, 1.0, 25.0] {
            let k = echo_kernel(b, 1e-12).unwrap();
            assert!(((k - 2.0 * b) / (2.0 * b)).abs() < 1e-6);
        }
    }

    #[test]
    fn kernel_decreases_in_c() {
        let k1 = echo_kernel(1.0, 1.0).unwrap();
        let kh = echo_kernel(1.0, 0.5).unwrap();
        let k0 = echo_kernel(1.0, 0.0).unwrap();
        assert!(k1 < kh && kh < k0);
    }

    #[test]
    fn ei_matches_quadrature_of_the_rate_integrand() {
        // ∫₀^∞ e^{-u/(β a_n γ)} / (1+u) du = e^{y} E1(y), y = 1/(β a_n γ)
        let (beta, a_n, gamma) = (1.0, 0.3, 10.0);
        let s = beta * a_n * gamma;
        let y = 1.0 / s;
        let spec = QuadratureSpec::new(1e-13, 1e-12, 4000).unwrap();
        let q = integrate(|u| (-u / s).exp() / (1.0 + u), 0.0, f64::INFINITY, &spec).unwrap();
        let closed = -y.exp() * exp_integral_ei(-y).unwrap();
        assert!((q - closed).abs() < 1e-8, "{q} vs {closed}");
        assert!((neg_exp_scaled_ei(-y).unwrap() - closed).abs() < 1e-13);
    }

    /// `I_k(x)` by its power series.
    fn bessel_i(k: u32, x: f64) -> f64 {
        let h = 0.5 * x;
        let mut term = h.powi(k as i32) / (1..=k).map(f64::from).product::<f64>();
        let mut sum = term;
        for j in 1..400 {
            term *= h * h / (j as f64 * (j + k) as f64);
            sum += term;
            if term < 1e-18 * sum {
                break;
            }
        }
        sum
    }

    /// Integer-order Marcum Q from the Bessel-series representation.
    fn marcum_bessel(m: u32, a: f64, b: f64) -> f64 {
        let pre = (-(a * a + b * b) / 2.0).exp();
        let x = a * b;
        let q1 = if b > a {
            let r = a / b;
            let mut s = 0.0;
            for k in 0..200 {
                let t = r.powi(k) * bessel_i(k as u32, x);
                s += t;
                if t < 1e-18 * s {
                    break;
                }
            }
            pre * s
        } else {
            let r = b / a;
            let mut s = 0.0;
            for k in 1..400 {
                let t = r.powi(k) * bessel_i(k as u32, x);
                s += t;
                if t < 1e-18 * s.max(1e-300) {
                    break;
                }
            }
            1.0 - pre * s
        };
        let extra: f64 = (1..m).map(|k| (b / a).powi(k as i32) * bessel_i(k, x)).sum();
        q1 + pre * extra
    }

    #[test]
    fn integer_order_matches_bessel_series() {
        for &m in &[1u32, 2, 3] {
            for &a in &[0.5, 1.5, 3.0, 4.0] {
                for &b in &[0.3, 1.0, 2.5, 5.0] {
                    let want = marcum_bessel(m, a, b);
                    let got = marcum_q(m as f64, a, b).unwrap();
                    assert!((got - want).abs() < 1e-10, "m={m} a={a} b={b}: {got} vs {want}");
                }
            }
        }
    }

    #[test]
    fn marcum_monotone_on_grid() {
        let mut violations = 0;
        for &nu in &[2.0, 2.5] {
            let mut prev = 1.0;
            for i in 0..100 {
                let v = marcum_q(nu, 2.0, 0.1 * i as f64).unwrap();
                if v > prev {
                    violations += 1;
                }
                prev = v;
            }
            let mut prev = 0.0;
            for i in 0..100 {
                let v = marcum_q(nu, 0.1 * i as f64, 3.0).unwrap();
                if v < prev {
                    violations += 1;
                }
                prev = v;
            }
        }
        assert_eq!(violations, 0);
    }

    proptest! {
        #[test]
        fn erfc_reflection(z in -6.0f64..6.0) {
            let s = erfc(z).unwrap() + erfc(-z).unwrap();
            prop_assert!((s - 2.0).abs() < 1e-12);
        }

        #[test]
        fn erfcx_consistent_with_erfc(z in 0.0f64..25.0) {
            let e = erfc(z).unwrap();
            prop_assume!(e > 1e-280);
            let via = erfcx(z).unwrap() * (-z * z).exp();
            prop_assert!(((via - e) / e).abs() < 1e-12);
        }

        #[test]
        fn kernel_bounded_by_limit(b in 1e-3f64..100.0, c in 0.0f64..1e3) {
            let k = echo_kernel(b, c).unwrap();
            prop_assert!(k > 0.0 && k <= 2.0 * b * (1.0 + 1e-14));
        }
    }
}
