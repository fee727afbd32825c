//! Exponential integral for negative arguments.

use crate::error::{domain, Result};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// `e^{y} E₁(y)` for `y > 0`, finite for all positive `y`.
pub(crate) fn exp_scaled_e1(y: f64) -> f64 {
    debug_assert!(y > 0.0);
    if y <= 1.0 {
        // E1(y) = -γ - ln y - Σ (-y)^k / (k k!)
        let mut term = 1.0;
        let mut sum = 0.0;
        for k in 1..200 {
            term *= -y / k as f64;
            let add = term / k as f64;
            sum += add;
            if add.abs() < 1e-17 * sum.abs().max(1e-300) {
                break;
            }
        }
        return y.exp() * (-EULER_GAMMA - y.ln() - sum);
    }
    // Lentz evaluation of 1/(y+1- 1²/(y+3- 2²/(y+5- ...)))
    const TINY: f64 = 1e-300;
    let mut b = y + 1.0;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..10_000 {
        let an = -((i * i) as f64);
        b += 2.0;
        d = 1.0 / (an * d + b);
        c = b + an / c;
        let delta = c * d;
        h *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h
}

/// Principal-value exponential integral `Ei(x)` for `x < 0`.
///
/// Uses `Ei(x) = -E₁(-x)`.
pub fn exp_integral_ei(x: f64) -> Result<f64> {
    if !(x < 0.0) || !x.is_finite() {
        return Err(domain("exp_integral_ei", format!("need finite x < 0, got {x}")));
    }
    let y = -x;
    Ok(-exp_scaled_e1(y) * (-y).exp())
}

/// `-e^{-x} Ei(x)` for `x < 0`, i.e. `∫₀^∞ e^{-t}/(t - x) dt`, without
/// overflow for large `|x|`.
pub fn neg_exp_scaled_ei(x: f64) -> Result<f64> {
    if !(x < 0.0) || !x.is_finite() {
        return Err(domain("neg_exp_scaled_ei", format!("need finite x < 0, got {x}")));
    }
    Ok(exp_scaled_e1(-x))
}
