//! Echo detection at the relay: false alarm, detection and threshold choice.
//!
//! The normalized received energy `2|y|²/N0` is noncentral chi-square with
//! four degrees of freedom without a target and five with one, so the tail
//! probabilities are Marcum Q functions of order 2 and 5/2.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{substream, ChannelRealization, ChannelSampler};
use crate::error::{domain, Result};
use crate::scenario::{LinkVariances, SystemParams};
use crate::specfun::{marcum_q, marcum_q_inv_b};

/// Marcum order without a target (four degrees of freedom).
pub const ORDER_H0: f64 = 2.0;
/// Marcum order with a target (five degrees of freedom).
pub const ORDER_H1: f64 = 2.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionConfig {
    pub p_fa_target: f64,
    pub ensemble_size: usize,
}

impl DetectionConfig {
    pub fn new(p_fa_target: f64, ensemble_size: usize) -> Result<Self> {
        let c = Self {
            p_fa_target,
            ensemble_size,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p_fa_target > 0.0 && self.p_fa_target < 1.0) {
            return Err(domain(
                "DetectionConfig",
                format!("p_fa_target must be in (0,1), got {}", self.p_fa_target),
            ));
        }
        if self.ensemble_size == 0 {
            return Err(domain("DetectionConfig", "ensemble_size must be >= 1"));
        }
        Ok(())
    }
}

/// Noncentrality parameters `(a₀, a₁)` of the two hypotheses.
pub fn noncentrality(params: &SystemParams, g: &ChannelRealization) -> (f64, f64) {
    let source = (params.a_n * params.p_com).sqrt() + (params.a_f * params.p_com).sqrt();
    let h0 = g.h_sr * source + g.h_li * (params.omega * params.p_sen).sqrt();
    let h1 = h0 + g.h_rr * (params.delta * params.p_sen).sqrt();
    let scale = 2.0 / params.n0;
    ((scale * h0.norm_sqr()).sqrt(), (scale * h1.norm_sqr()).sqrt())
}

fn threshold_arg(params: &SystemParams, zeta: f64) -> Result<f64> {
    if !(zeta >= 0.0) {
        return Err(domain("sensing", format!("threshold must be >= 0, got {zeta}")));
    }
    Ok((2.0 * zeta / params.n0).sqrt())
}

/// False-alarm probability at threshold `zeta`.
pub fn false_alarm(params: &SystemParams, g: &ChannelRealization, zeta: f64) -> Result<f64> {
    let b = threshold_arg(params, zeta)?;
    marcum_q(ORDER_H0, noncentrality(params, g).0, b)
}

/// Detection probability at threshold `zeta`.
pub fn detection_probability(params: &SystemParams, g: &ChannelRealization, zeta: f64) -> Result<f64> {
    let b = threshold_arg(params, zeta)?;
    marcum_q(ORDER_H1, noncentrality(params, g).1, b)
}

/// Threshold whose false-alarm probability equals `p_fa`.
pub fn calibrate_threshold(params: &SystemParams, g: &ChannelRealization, p_fa: f64) -> Result<f64> {
    if !(p_fa > 0.0 && p_fa < 1.0) {
        return Err(domain(
            "calibrate_threshold",
            format!("p_fa must be in (0,1), got {p_fa}"),
        ));
    }
    let b = marcum_q_inv_b(ORDER_H0, noncentrality(params, g).0, p_fa)?;
    Ok(b * b * params.n0 / 2.0)
}

/// Detection probability with the threshold calibrated to this realization.
pub fn calibrated_detection(params: &SystemParams, g: &ChannelRealization, p_fa: f64) -> Result<f64> {
    let zeta = calibrate_threshold(params, g, p_fa)?;
    detection_probability(params, g, zeta)
}

/// Mean calibrated detection probability over `ensemble_size` draws from `rng`.
pub fn ensemble_detection<R: Rng + ?Sized>(
    params: &SystemParams,
    vars: &LinkVariances,
    config: &DetectionConfig,
    rng: &mut R,
) -> Result<f64> {
    params.validate()?;
    config.validate()?;
    let sampler = ChannelSampler::new(vars)?;
    let mut sum = 0.0;
    for _ in 0..config.ensemble_size {
        sum += calibrated_detection(params, &sampler.sample(rng), config.p_fa_target)?;
    }
    Ok(sum / config.ensemble_size as f64)
}

/// Parallel [`ensemble_detection`] where draw `i` uses substream `i` of
/// `seed`, so the result does not depend on the worker count.
pub fn ensemble_detection_seeded(
    params: &SystemParams,
    vars: &LinkVariances,
    config: &DetectionConfig,
    seed: u64,
) -> Result<f64> {
    params.validate()?;
    config.validate()?;
    let sampler = ChannelSampler::new(vars)?;
    let values: Vec<f64> = (0..config.ensemble_size as u64)
        .into_par_iter()
        .map(|i| calibrated_detection(params, &sampler.sample(&mut substream(seed, i)), config.p_fa_target))
        .collect::<Result<_>>()?;
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{db_to_linear, derive_variances, paper_defaults, Mode};
    use num_complex::Complex64;

    fn setup() -> (SystemParams, LinkVariances) {
        let (p, g) = paper_defaults();
        (p, derive_variances(&p, &g).unwrap())
    }

    fn pinned() -> ChannelRealization {
        let c = |re: f64, im: f64| Complex64::new(re, im);
        ChannelRealization::from_coefficients(
            c(0.12, -0.05),
            c(0.03, 0.06),
            c(-0.08, 0.04),
            c(0.07, 0.02),
            c(0.1, -0.11),
            c(0.15, 0.09),
            c(0.04, -0.03),
        )
    }

    #[test]
    fn threshold_limits() {
        let (p, _) = setup();
        let g = pinned();
        assert_eq!(false_alarm(&p, &g, 0.0).unwrap(), 1.0);
        assert!(false_alarm(&p, &g, 1e6).unwrap() < 1e-300);
        assert!(false_alarm(&p, &g, -1.0).is_err());
    }

    #[test]
    fn calibration_round_trip() {
        let (p, _) = setup();
        let g = pinned();
        for target in [1e-3, 1e-5] {
            let zeta = calibrate_threshold(&p, &g, target).unwrap();
            assert!((false_alarm(&p, &g, zeta).unwrap() - target).abs() < 1e-9 * target.max(1e-3));
        }
        assert!(calibrate_threshold(&p, &g, 0.0).is_err());
    }

    #[test]
    fn echo_helps_detection() {
        let (p, _) = setup();
        let g = pinned();
        let zeta = calibrate_threshold(&p, &g, 1e-5).unwrap();
        let with = detection_probability(&p, &g, zeta).unwrap();
        let without = detection_probability(&SystemParams { delta: 0.0, ..p }, &g, zeta).unwrap();
        assert!(without < with);
        // with no echo the H1 statistic is the H0 one with an extra degree of freedom
        let (a0, _) = noncentrality(&p, &g);
        let b = (2.0 * zeta / p.n0).sqrt();
        assert!((without - marcum_q(2.5, a0, b).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn order_constants() {
        assert_eq!((ORDER_H0, ORDER_H1), (2.0, 2.5));
        let (p, _) = setup();
        let g = pinned();
        let zeta = calibrate_threshold(&p, &g, 1e-3).unwrap();
        let b = (2.0 * zeta / p.n0).sqrt();
        let a1 = noncentrality(&p, &g).1;
        let pd = detection_probability(&p, &g, zeta).unwrap();
        assert!((pd - marcum_q(2.0, a1, b).unwrap()).abs() > 1e-6);
    }

    #[test]
    fn detector_validity() {
        let (p, v) = setup();
        let sampler = ChannelSampler::new(&v).unwrap();
        let mut rng = substream(11, 0);
        let (mut constructive, mut violations, mut destructive_violations) = (0, 0, 0);
        for _ in 0..10_000 {
            let g = sampler.sample(&mut rng);
            let zeta = calibrate_threshold(&p, &g, 1e-3).unwrap();
            let pd = detection_probability(&p, &g, zeta).unwrap();
            let below = pd < false_alarm(&p, &g, zeta).unwrap();
            let (a0, a1) = noncentrality(&p, &g);
            if a1 >= a0 {
                constructive += 1;
                violations += below as usize;
            } else {
                destructive_violations += below as usize;
            }
        }
        assert!(constructive > 5000);
        assert_eq!(violations, 0);
        // a coherent echo can cancel part of the H0 signal
        assert!(destructive_violations > 0);
    }

    #[test]
    fn ensemble_of_one_is_single_realization() {
        let (p, v) = setup();
        let cfg = DetectionConfig::new(1e-5, 1).unwrap();
        let e = ensemble_detection(&p, &v, &cfg, &mut substream(5, 0)).unwrap();
        let g = ChannelSampler::new(&v).unwrap().sample(&mut substream(5, 0));
        assert_eq!(e, calibrated_detection(&p, &g, 1e-5).unwrap());
        assert_eq!(ensemble_detection_seeded(&p, &v, &cfg, 5).unwrap(), e);
    }

    fn sweep(p: &SystemParams, v: &LinkVariances, mode: Mode) -> Vec<f64> {
        let cfg = DetectionConfig::new(1e-5, 2000).unwrap();
        (0..=6)
            .map(|i| {
                let q = p
                    .with_mode(mode)
                    .with_powers(p.p_com, db_to_linear(20.0 + 5.0 * i as f64));
                ensemble_detection_seeded(&q, v, &cfg, 21).unwrap()
            })
            .collect()
    }

    #[test]
    fn full_duplex_lags_and_power_helps() {
        let (p, v) = setup();
        let fd = sweep(&p, &v, Mode::FullDuplex);
        let hd = sweep(&p, &v, Mode::HalfDuplex);
        assert!(fd.iter().zip(&hd).all(|(f, h)| f <= h), "{fd:?} {hd:?}");
        assert!(fd.windows(2).all(|w| w[1] >= w[0]), "{fd:?}");
        assert!(hd.windows(2).all(|w| w[1] >= w[0]), "{hd:?}");
    }

    #[test]
    fn weak_sensing_power_barely_detects() {
        let (p, v) = setup();
        let cfg = DetectionConfig::new(1e-5, 2000).unwrap();
        let pd = ensemble_detection_seeded(&p, &v, &cfg, 3).unwrap();
        assert!(pd < 0.01, "{pd}");
    }

    #[test]
    fn less_source_power_helps_sensing() {
        let (p, v) = setup();
        let cfg = DetectionConfig::new(1e-5, 2000).unwrap();
        let mut last = f64::INFINITY;
        for db in [10.0, 15.0, 20.0, 25.0] {
            let q = p.with_powers(db_to_linear(db), db_to_linear(30.0));
            let pd = ensemble_detection_seeded(&q, &v, &cfg, 4).unwrap();
            assert!(pd <= last, "{db}: {pd} > {last}");
            last = pd;
        }
    }
}
