//! Instantaneous SINRs of every decoding step and of the sensing echo.

use serde::{Deserialize, Serialize};

use crate::channel::ChannelRealization;
use crate::error::{domain, Result};
use crate::scenario::SystemParams;

/// All decode SINRs for one set of gains, linear scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinrSet {
    /// `x_f` at the near device over the direct link.
    pub sdn_xf: f64,
    /// `x_n` at the near device over the direct link, after SIC.
    pub sdn_xn: f64,
    /// `x_f` at the far device over the direct link.
    pub sdf_xf: f64,
    /// `x_f` at the relay.
    pub sr_xf: f64,
    /// `x_n` at the relay, after SIC.
    pub sr_xn: f64,
    /// `x_f` at the far device from the relay.
    pub rdf_xf: f64,
    /// `x_f` at the near device from the relay.
    pub rdn_xf: f64,
    /// `x_n` at the near device from the relay, after SIC.
    pub rdn_xn: f64,
    /// Echo at the relay against source signal, self-interference and noise.
    pub sense: f64,
}

/// Evaluates every SINR for one set of gains.
pub fn evaluate(params: &SystemParams, g: &ChannelRealization) -> SinrSet {
    let (a_f, a_n) = (params.a_f, params.a_n);
    let gc = params.gamma_c();
    let gd = params.gamma_direct();
    let gr = params.gamma_r();
    let interference = g.rho_rr * params.delta * gr + g.rho_li * params.omega * gr;

    let superposed = |rho: f64, snr: f64| {
        let s = rho * snr;
        a_f * s / (a_n * s + 1.0)
    };

    let sr_signal = g.rho_sr * gc;
    SinrSet {
        sdn_xf: superposed(g.rho_sdn, gd),
        sdn_xn: a_n * g.rho_sdn * gd,
        sdf_xf: superposed(g.rho_sdf, gd),
        sr_xf: a_f * sr_signal / (a_n * sr_signal + interference + 1.0),
        sr_xn: a_n * sr_signal / (interference + 1.0),
        rdf_xf: superposed(g.rho_rdf, gr),
        rdn_xf: superposed(g.rho_rdn, gr),
        rdn_xn: a_n * g.rho_rdn * gr,
        sense: params.delta * g.rho_rr * gr / (sr_signal + g.rho_li * params.omega * gr + 1.0),
    }
}

/// Expected received power at the relay for the given gains.
pub fn received_power(params: &SystemParams, g: &ChannelRealization) -> f64 {
    g.rho_sr * params.p_com
        + g.rho_rr * params.delta * params.p_sen
        + g.rho_li * params.omega * params.p_sen
        + params.n0
}

/// Recovers the reflection product `ρ_RR·δ` from a measured received power,
/// clamped at zero.
pub fn estimate_target_info(params: &SystemParams, g: &ChannelRealization, measured_power: f64) -> Result<f64> {
    if !(params.p_sen > 0.0) {
        return Err(domain(
            "estimate_target_info",
            "sensing power is zero, echo gain is unobservable",
        ));
    }
    if !(measured_power >= 0.0) {
        return Err(domain(
            "estimate_target_info",
            format!("measured power must be >= 0, got {measured_power}"),
        ));
    }
    let known = g.rho_li * params.omega * params.p_sen + g.rho_sr * params.p_com + params.n0;
    Ok(((measured_power - known) / params.p_sen).max(0.0))
}
