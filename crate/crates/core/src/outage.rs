//! Closed-form outage probabilities, their high-SNR forms and the
//! diversity order.
//!
//! Every closed form goes through one factor, the probability that the relay
//! decodes when the source link must clear `θ·(ρ_RR δ γ_r + ρ_LI ω γ_r + 1)`:
//!
//! `P_sr(θ) = e^{−θ/β_SR} · β_SR/(β_SR + β_LI ω γ_r θ) · K(β_RR, δ γ_r θ/β_SR)/(2β_RR)`
//!
//! where `K` is [`echo_kernel`](crate::specfun::echo_kernel).

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::scenario::{db_to_linear, LinkVariances, Mode, SystemParams};
use crate::specfun::echo_kernel_unchecked;

/// Decoding thresholds on the channel gains.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutageThresholds {
    pub theta1: f64,
    pub theta2: f64,
    pub theta: f64,
    pub phi1: f64,
    pub phi2: f64,
    pub phi: f64,
    pub theta1_star: f64,
    pub theta2_star: f64,
    pub theta_star: f64,
}

impl OutageThresholds {
    /// `None` when `a_f ≤ a_n γ_th_f`, where the far signal can never be
    /// decoded and both outages are 1.
    pub fn new(params: &SystemParams) -> Option<Self> {
        Self::with_snrs(params, params.gamma_c(), params.gamma_r())
    }

    fn with_snrs(params: &SystemParams, gc: f64, gr: f64) -> Option<Self> {
        let margin = params.a_f - params.a_n * params.gamma_th_f;
        if !(margin > 0.0) {
            return None;
        }
        let theta1_star = params.gamma_th_f / margin;
        let theta2_star = params.gamma_th_n / params.a_n;
        let theta_star = theta1_star.max(theta2_star);
        let (theta1, theta2) = (theta1_star / gc, theta2_star / gc);
        let (phi1, phi2) = (theta1_star / gr, theta2_star / gr);
        Some(Self {
            theta1,
            theta2,
            theta: theta1.max(theta2),
            phi1,
            phi2,
            phi: phi1.max(phi2),
            theta1_star,
            theta2_star,
            theta_star,
        })
    }
}

/// Probability that the relay decodes when its source link must exceed
/// `theta·(ρ_RR δ γ_r + ρ_LI ω γ_r + 1)`.
pub fn relay_success_probability(params: &SystemParams, vars: &LinkVariances, theta: f64) -> f64 {
    if theta.is_infinite() {
        return 0.0;
    }
    let gr = params.gamma_r();
    (-theta / vars.beta_sr).exp() * relay_interference_factor(params, vars, gr * theta)
}

/// `β_SR/(β_SR + β_LI ω x) · K(β_RR, δx/β_SR)/(2β_RR)` with `x = γ_r θ`.
fn relay_interference_factor(params: &SystemParams, vars: &LinkVariances, x: f64) -> f64 {
    let li = vars.beta_sr / (vars.beta_sr + vars.beta_li * params.omega * x);
    let echo = echo_kernel_unchecked(vars.beta_rr, params.delta * x / vars.beta_sr) / (2.0 * vars.beta_rr);
    li * echo
}

fn checked(params: &SystemParams, vars: &LinkVariances) -> Result<()> {
    params.validate()?;
    vars.validate()
}

/// Exact outage probability of the far device.
pub fn outage_far(params: &SystemParams, vars: &LinkVariances) -> Result<f64> {
    checked(params, vars)?;
    if params.mode == Mode::NonCooperative {
        return Ok(direct_only(params, |t| t.theta1, vars.beta_sdf));
    }
    let Some(t) = OutageThresholds::new(params) else {
        return Ok(1.0);
    };
    let direct = -(-t.theta1 / vars.beta_sdf).exp_m1();
    let relay = relay_success_probability(params, vars, t.theta1) * (-t.phi1 / vars.beta_rdf).exp();
    Ok((direct * (1.0 - relay)).clamp(0.0, 1.0))
}

/// Exact outage probability of the near device.
pub fn outage_near(params: &SystemParams, vars: &LinkVariances) -> Result<f64> {
    checked(params, vars)?;
    if params.mode == Mode::NonCooperative {
        return Ok(direct_only(params, |t| t.theta, vars.beta_sdn));
    }
    let Some(t) = OutageThresholds::new(params) else {
        return Ok(1.0);
    };
    let direct = -(-t.theta / vars.beta_sdn).exp_m1();
    let relay = relay_success_probability(params, vars, t.theta) * (-t.phi / vars.beta_rdn).exp();
    Ok((direct * (1.0 - relay)).clamp(0.0, 1.0))
}

fn direct_only(params: &SystemParams, pick: impl Fn(&OutageThresholds) -> f64, beta: f64) -> f64 {
    match OutageThresholds::with_snrs(params, params.gamma_direct(), params.gamma_r()) {
        Some(t) => -(-pick(&t) / beta).exp_m1(),
        None => 1.0,
    }
}

/// High-SNR outage of the far device, keeping the actual `γ_r/γ_c` ratio.
pub fn outage_far_asymptotic(params: &SystemParams, vars: &LinkVariances) -> Result<f64> {
    checked(params, vars)?;
    let t = asymptotic_thresholds(params)?;
    if params.mode == Mode::NonCooperative {
        return Ok(t.theta1_star / params.gamma_direct() / vars.beta_sdf);
    }
    let ratio = params.gamma_r() / params.gamma_c();
    let coop = (1.0 - t.phi1 / vars.beta_rdf) * relay_interference_factor(params, vars, ratio * t.theta1_star);
    Ok(t.theta1 / vars.beta_sdf * (1.0 - coop))
}

/// High-SNR outage of the near device, keeping the actual `γ_r/γ_c` ratio.
pub fn outage_near_asymptotic(params: &SystemParams, vars: &LinkVariances) -> Result<f64> {
    checked(params, vars)?;
    let t = asymptotic_thresholds(params)?;
    if params.mode == Mode::NonCooperative {
        return Ok(t.theta_star / params.gamma_direct() / vars.beta_sdn);
    }
    let ratio = params.gamma_r() / params.gamma_c();
    let coop = (1.0 - t.phi / vars.beta_rdn) * relay_interference_factor(params, vars, ratio * t.theta_star);
    Ok(t.theta / vars.beta_sdn * (1.0 - coop))
}

fn asymptotic_thresholds(params: &SystemParams) -> Result<OutageThresholds> {
    if !(params.p_com > 0.0 && params.p_sen > 0.0) {
        return Err(domain("outage asymptote", "needs positive transmit powers"));
    }
    OutageThresholds::new(params).ok_or_else(|| domain("outage asymptote", "undefined when a_f <= a_n * gamma_th_f"))
}

/// Cooperative factor `1 − P_sr(θ)·e^{−φ/β_RD}` of the exact far outage and
/// its high-SNR constant.
pub fn cooperative_factor_far(params: &SystemParams, vars: &LinkVariances) -> Result<(f64, f64)> {
    checked(params, vars)?;
    let t = asymptotic_thresholds(params)?;
    let exact = 1.0 - relay_success_probability(params, vars, t.theta1) * (-t.phi1 / vars.beta_rdf).exp();
    let ratio = params.gamma_r() / params.gamma_c();
    let limit = 1.0 - relay_interference_factor(params, vars, ratio * t.theta1_star);
    Ok((exact, limit))
}

/// Outage function signature accepted by [`diversity_order`].
pub type OutageFn = fn(&SystemParams, &LinkVariances) -> Result<f64>;

/// Log-log slope `−Δlog P / Δlog γ` between two SNRs, with `γ_c = γ_r`.
pub fn diversity_order(
    outage: OutageFn,
    params: &SystemParams,
    vars: &LinkVariances,
    snr_lo_db: f64,
    snr_hi_db: f64,
) -> Result<f64> {
    if !(snr_hi_db > snr_lo_db) {
        return Err(domain(
            "diversity_order",
            format!("need snr_hi > snr_lo, got {snr_lo_db}..{snr_hi_db}"),
        ));
    }
    let p_lo = outage(&params.with_snr_db(snr_lo_db), vars)?;
    let p_hi = outage(&params.with_snr_db(snr_hi_db), vars)?;
    if p_lo < 1e-12 || p_hi < 1e-12 {
        return Err(Error::Range(format!(
            "outage underflow in diversity window: {p_lo:e} at {snr_lo_db} dB, {p_hi:e} at {snr_hi_db} dB"
        )));
    }
    let decades = (db_to_linear(snr_hi_db) / db_to_linear(snr_lo_db)).log10();
    Ok(-(p_hi.log10() - p_lo.log10()) / decades)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{derive_variances, paper_defaults};

    fn setup() -> (SystemParams, LinkVariances) {
        let (p, g) = paper_defaults();
        let v = derive_variances(&p, &g).unwrap();
        (p, v)
    }

    #[test]
    fn threshold_constants() {
        let (p, _) = setup();
        let t = OutageThresholds::new(&p).unwrap();
        assert!((t.theta1_star - 2.5).abs() < 1e-15);
        assert!((t.theta2_star - 20.0 / 3.0).abs() < 1e-14);
        assert_eq!(t.theta_star, t.theta2_star);
        assert!((t.theta1 - 0.025).abs() < 1e-16);
    }

    #[test]
    fn undecodable_far_signal_means_certain_outage() {
        let (p, v) = setup();
        let p = SystemParams { gamma_th_f: 3.0, ..p };
        assert!(OutageThresholds::new(&p).is_none());
        assert_eq!(outage_far(&p, &v).unwrap(), 1.0);
        assert_eq!(outage_near(&p, &v).unwrap(), 1.0);
        assert!(outage_far_asymptotic(&p, &v).is_err());
    }

    #[test]
    fn direct_link_only() {
        let (p, v) = setup();
        let nc = p.with_mode(Mode::NonCooperative);
        let t = OutageThresholds::with_snrs(&p, nc.gamma_direct(), p.gamma_r()).unwrap();
        let want = 1.0 - (-t.theta / v.beta_sdn).exp();
        assert!((outage_near(&nc, &v).unwrap() - want).abs() < 1e-15);
        let slope = diversity_order(outage_far, &nc, &v, 50.0, 60.0).unwrap();
        assert!((slope - 1.0).abs() < 0.05, "{slope}");
    }

    #[test]
    fn high_snr_slope_is_one() {
        let (p, v) = setup();
        for f in [outage_far as OutageFn, outage_near] {
            let d = diversity_order(f, &p, &v, 50.0, 60.0).unwrap();
            assert!((d - 1.0).abs() < 0.1, "{d}");
        }
    }

    #[test]
    fn asymptote_tracks_exact() {
        let (p, v) = setup();
        for db in [50.0, 60.0] {
            let q = p.with_snr_db(db);
            let rf = outage_far_asymptotic(&q, &v).unwrap() / outage_far(&q, &v).unwrap();
            let rn = outage_near_asymptotic(&q, &v).unwrap() / outage_near(&q, &v).unwrap();
            assert!((rf - 1.0).abs() < 0.05 && (rn - 1.0).abs() < 0.05, "{db} dB: {rf} {rn}");
        }
    }

    #[test]
    fn cooperative_factor_converges() {
        let (p, v) = setup();
        let gap = |db: f64| {
            let (exact, limit) = cooperative_factor_far(&p.with_snr_db(db), &v).unwrap();
            (exact / limit - 1.0).abs()
        };
        let (g60, g80) = (gap(60.0), gap(80.0));
        assert!(g80 < 1e-4 && g80 < 0.02 * g60, "{g60} {g80}");
    }

    #[test]
    fn monotone_in_source_power_and_bounded() {
        let (p, v) = setup();
        let mut last = (1.0, 1.0);
        for i in 0..40 {
            let q = p.with_powers(db_to_linear(i as f64), p.p_sen);
            let f = outage_far(&q, &v).unwrap();
            let n = outage_near(&q, &v).unwrap();
            assert!((0.0..=1.0).contains(&f) && (0.0..=1.0).contains(&n));
            assert!(f <= last.0 + 1e-15 && n <= last.1 + 1e-15);
            last = (f, n);
        }
    }

    #[test]
    fn full_duplex_never_beats_half_duplex() {
        let (p, v) = setup();
        for i in 0..=20 {
            let q = p.with_snr_db(20.0 + i as f64);
            let hd = q.with_mode(Mode::HalfDuplex);
            assert!(outage_far(&q, &v).unwrap() >= outage_far(&hd, &v).unwrap());
            assert!(outage_near(&q, &v).unwrap() >= outage_near(&hd, &v).unwrap());
        }
    }

    #[test]
    fn degenerate_interference_is_continuous() {
        let (p, v) = setup();
        let a = outage_far(&SystemParams { delta: 0.0, ..p }, &v).unwrap();
        let b = outage_far(&SystemParams { delta: 1e-13, ..p }, &v).unwrap();
        assert!((a - b).abs() < 1e-9);
        let c = outage_far(&p.with_mode(Mode::HalfDuplex), &v).unwrap();
        assert!(c.is_finite());
    }

    #[test]
    fn diversity_errors() {
        let (p, v) = setup();
        assert!(matches!(
            diversity_order(outage_far, &p, &v, 60.0, 50.0),
            Err(Error::Domain { .. })
        ));
        let tiny = LinkVariances { beta_sdf: 1e6, ..v };
        assert!(matches!(
            diversity_order(outage_far, &p, &tiny, 150.0, 160.0),
            Err(Error::Range(_))
        ));
    }
}
