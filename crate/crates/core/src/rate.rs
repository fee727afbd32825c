//! Achievable and ergodic rates, exact and approximate.
//!
//! Exact ergodic rates use `E[log₂(1+X)] = (1/ln 2)∫₀^∞ P(X > w)/(1+w) dw`
//! with the survival function of each min-of-SINRs built from independent
//! link gains. The relayed survival terms reuse
//! [`relay_success_probability`](crate::outage::relay_success_probability).

use serde::{Deserialize, Serialize};

use crate::channel::ChannelRealization;
use crate::error::Result;
use crate::outage::relay_success_probability;
use crate::scenario::{LinkVariances, Mode, SystemParams};
use crate::sinr;
use crate::specfun::{integrate, neg_exp_scaled_ei, QuadratureSpec};

/// Per-device rates in bits/s/Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    pub far: f64,
    pub near: f64,
}

impl Rates {
    pub fn sum(&self) -> f64 {
        self.far + self.near
    }
}

/// Weight of the relayed term: two slots in half duplex, none without a relay.
pub fn relay_weight(mode: Mode) -> f64 {
    match mode {
        Mode::FullDuplex => 1.0,
        Mode::HalfDuplex => 0.5,
        Mode::NonCooperative => 0.0,
    }
}

/// Instantaneous achievable rates for one realization.
pub fn achievable_rates(params: &SystemParams, g: &ChannelRealization) -> Rates {
    let s = sinr::evaluate(params, g);
    let w = relay_weight(params.mode);
    let far_relay = (s.sr_xf.min(s.rdf_xf).min(s.rdn_xf)).ln_1p();
    let far_direct = s.sdf_xf.min(s.sdn_xf).ln_1p();
    let near_relay = s.sr_xn.min(s.rdn_xn).ln_1p();
    let near_direct = s.sdn_xn.ln_1p();
    let relayed = |r: f64| if w == 0.0 { 0.0 } else { w * r };
    Rates {
        far: (relayed(far_relay) + far_direct) / std::f64::consts::LN_2,
        near: (relayed(near_relay) + near_direct) / std::f64::consts::LN_2,
    }
}

/// Exact ergodic rate split into its relayed and direct parts, before the
/// mode weight is applied.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateTerms {
    pub relayed: f64,
    pub direct: f64,
}

impl RateTerms {
    pub fn total(&self, mode: Mode) -> f64 {
        let w = relay_weight(mode);
        if w == 0.0 {
            self.direct
        } else {
            w * self.relayed + self.direct
        }
    }
}

fn spec() -> QuadratureSpec {
    QuadratureSpec::default()
}

fn checked(params: &SystemParams, vars: &LinkVariances) -> Result<()> {
    params.validate()?;
    vars.validate()
}

/// Both exact terms of the far device's ergodic rate.
pub fn far_terms(params: &SystemParams, vars: &LinkVariances) -> Result<RateTerms> {
    checked(params, vars)?;
    let (a_f, a_n) = (params.a_f, params.a_n);
    let cap = a_f / a_n;
    let gc = params.gamma_c();
    let gr = params.gamma_r();
    let gd = params.gamma_direct();
    // θ(w) = w / (γ (a_f − a_n w)) is the gain a link needs for SINR w
    let need = |w: f64, g: f64| w / (g * (a_f - a_n * w));

    let relayed = if params.mode == Mode::NonCooperative {
        0.0
    } else {
        let beta_rd = 1.0 / vars.beta_rdf + 1.0 / vars.beta_rdn;
        integrate(
            |w| {
                if w >= cap {
                    return 0.0;
                }
                let p = relay_success_probability(params, vars, need(w, gc)) * (-need(w, gr) * beta_rd).exp();
                p / (1.0 + w)
            },
            0.0,
            cap,
            &spec(),
        )?
    };
    let beta_sd = 1.0 / vars.beta_sdf + 1.0 / vars.beta_sdn;
    let direct = integrate(
        |w| {
            if w >= cap {
                return 0.0;
            }
            (-need(w, gd) * beta_sd).exp() / (1.0 + w)
        },
        0.0,
        cap,
        &spec(),
    )?;
    Ok(RateTerms {
        relayed: relayed / std::f64::consts::LN_2,
        direct: direct / std::f64::consts::LN_2,
    })
}

/// Both exact terms of the near device's ergodic rate.
pub fn near_terms(params: &SystemParams, vars: &LinkVariances) -> Result<RateTerms> {
    checked(params, vars)?;
    let relayed = if params.mode == Mode::NonCooperative {
        0.0
    } else {
        near_relayed_integral(params, vars, f64::INFINITY)?
    };
    let y = 1.0 / (vars.beta_sdn * params.a_n * params.gamma_direct());
    let direct = if y.is_infinite() { 0.0 } else { neg_exp_scaled_ei(-y)? };
    Ok(RateTerms {
        relayed: relayed / std::f64::consts::LN_2,
        direct: direct / std::f64::consts::LN_2,
    })
}

fn near_relayed_integral(params: &SystemParams, vars: &LinkVariances, upper: f64) -> Result<f64> {
    let sc = params.a_n * params.gamma_c();
    let sr = vars.beta_rdn * params.a_n * params.gamma_r();
    integrate(
        |w| relay_success_probability(params, vars, w / sc) * (-w / sr).exp() / (1.0 + w),
        0.0,
        upper,
        &spec(),
    )
}

/// Exact ergodic rate of the far device.
pub fn ergodic_rate_far(params: &SystemParams, vars: &LinkVariances) -> Result<f64> {
    Ok(far_terms(params, vars)?.total(params.mode))
}

/// Exact ergodic rate of the near device.
pub fn ergodic_rate_near(params: &SystemParams, vars: &LinkVariances) -> Result<f64> {
    Ok(near_terms(params, vars)?.total(params.mode))
}

/// Exact ergodic rates of both devices.
pub fn ergodic_rates(params: &SystemParams, vars: &LinkVariances) -> Result<Rates> {
    Ok(Rates {
        far: ergodic_rate_far(params, vars)?,
        near: ergodic_rate_near(params, vars)?,
    })
}

/// Approximate rates: every gain replaced by its mean, with `E[ρ_RR] = 2β_RR²`.
pub fn ergodic_rates_approx(params: &SystemParams, vars: &LinkVariances) -> Result<Rates> {
    checked(params, vars)?;
    Ok(achievable_rates(params, &ChannelRealization::mean_surrogate(vars)?))
}

pub fn ergodic_rate_far_approx(params: &SystemParams, vars: &LinkVariances) -> Result<f64> {
    Ok(ergodic_rates_approx(params, vars)?.far)
}

pub fn ergodic_rate_near_approx(params: &SystemParams, vars: &LinkVariances) -> Result<f64> {
    Ok(ergodic_rates_approx(params, vars)?.near)
}

pub fn ergodic_sum_approx(params: &SystemParams, vars: &LinkVariances) -> Result<f64> {
    Ok(ergodic_rates_approx(params, vars)?.sum())
}

/// High-SNR ceilings of the relayed terms with `γ_c = γ_r → ∞`.
pub fn relayed_rate_limits(params: &SystemParams, vars: &LinkVariances) -> Rates {
    let interference = 2.0 * vars.beta_rr * vars.beta_rr * params.delta + vars.beta_li * params.omega;
    let far = params.a_f * vars.beta_sr / (params.a_n * vars.beta_sr + interference);
    let near = params.a_n * vars.beta_sr / interference;
    Rates {
        far: far.log2_1p(),
        near: near.log2_1p(),
    }
}

trait Log2OnePlus {
    fn log2_1p(self) -> f64;
}

impl Log2OnePlus for f64 {
    fn log2_1p(self) -> f64 {
        self.ln_1p() / std::f64::consts::LN_2
    }
}
