//! Rayleigh channel realizations and the law of the cascaded echo gain.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::scenario::LinkVariances;

/// One draw of every link.
///
/// The echo channel is the round trip over a slowly moving target, so
/// `h_rr = h_rt²` and `rho_rr = rho_rt²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelRealization {
    pub h_sr: Complex64,
    pub h_sdf: Complex64,
    pub h_sdn: Complex64,
    pub h_rdf: Complex64,
    pub h_rdn: Complex64,
    pub h_rt: Complex64,
    pub h_rr: Complex64,
    pub h_li: Complex64,
    pub rho_sr: f64,
    pub rho_sdf: f64,
    pub rho_sdn: f64,
    pub rho_rdf: f64,
    pub rho_rdn: f64,
    pub rho_rt: f64,
    pub rho_rr: f64,
    pub rho_li: f64,
}

/// Plain power gains, used to build deterministic realizations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gains {
    pub rho_sr: f64,
    pub rho_sdf: f64,
    pub rho_sdn: f64,
    pub rho_rdf: f64,
    pub rho_rdn: f64,
    pub rho_rr: f64,
    pub rho_li: f64,
}

impl ChannelRealization {
    /// Realization from complex coefficients of the one-way links.
    #[allow(clippy::too_many_arguments)]
    pub fn from_coefficients(
        h_sr: Complex64,
        h_sdf: Complex64,
        h_sdn: Complex64,
        h_rdf: Complex64,
        h_rdn: Complex64,
        h_rt: Complex64,
        h_li: Complex64,
    ) -> Self {
        let h_rr = h_rt * h_rt;
        let rho_rt = h_rt.norm_sqr();
        Self {
            h_sr,
            h_sdf,
            h_sdn,
            h_rdf,
            h_rdn,
            h_rt,
            h_rr,
            h_li,
            rho_sr: h_sr.norm_sqr(),
            rho_sdf: h_sdf.norm_sqr(),
            rho_sdn: h_sdn.norm_sqr(),
            rho_rdf: h_rdf.norm_sqr(),
            rho_rdn: h_rdn.norm_sqr(),
            rho_rt,
            rho_rr: rho_rt * rho_rt,
            rho_li: h_li.norm_sqr(),
        }
    }

    /// Realization with the given gains and real, non-negative coefficients.
    pub fn from_gains(g: Gains) -> Result<Self> {
        let all = [g.rho_sr, g.rho_sdf, g.rho_sdn, g.rho_rdf, g.rho_rdn, g.rho_rr, g.rho_li];
        if all.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(domain(
                "ChannelRealization::from_gains",
                format!("gains must be finite and >= 0: {g:?}"),
            ));
        }
        let re = |v: f64| Complex64::new(v.sqrt(), 0.0);
        let rho_rt = g.rho_rr.sqrt();
        Ok(Self {
            h_sr: re(g.rho_sr),
            h_sdf: re(g.rho_sdf),
            h_sdn: re(g.rho_sdn),
            h_rdf: re(g.rho_rdf),
            h_rdn: re(g.rho_rdn),
            h_rt: re(rho_rt),
            h_rr: re(g.rho_rr),
            h_li: re(g.rho_li),
            rho_sr: g.rho_sr,
            rho_sdf: g.rho_sdf,
            rho_sdn: g.rho_sdn,
            rho_rdf: g.rho_rdf,
            rho_rdn: g.rho_rdn,
            rho_rt,
            rho_rr: g.rho_rr,
            rho_li: g.rho_li,
        })
    }

    /// Mean-value surrogate: every gain at its mean, `E[ρ_RR] = 2β_RR²`.
    pub fn mean_surrogate(vars: &LinkVariances) -> Result<Self> {
        vars.validate()?;
        Self::from_gains(Gains {
            rho_sr: vars.beta_sr,
            rho_sdf: vars.beta_sdf,
            rho_sdn: vars.beta_sdn,
            rho_rdf: vars.beta_rdf,
            rho_rdn: vars.beta_rdn,
            rho_rr: 2.0 * vars.beta_rr * vars.beta_rr,
            rho_li: vars.beta_li,
        })
    }

    pub fn gains(&self) -> Gains {
        Gains {
            rho_sr: self.rho_sr,
            rho_sdf: self.rho_sdf,
            rho_sdn: self.rho_sdn,
            rho_rdf: self.rho_rdf,
            rho_rdn: self.rho_rdn,
            rho_rr: self.rho_rr,
            rho_li: self.rho_li,
        }
    }
}

/// Draws realizations for fixed link variances.
#[derive(Debug, Clone, Copy)]
pub struct ChannelSampler {
    // per-component standard deviations √(β/2)
    sd: [f64; 7],
}

impl ChannelSampler {
    pub fn new(vars: &LinkVariances) -> Result<Self> {
        vars.validate()?;
        let s = |b: f64| (0.5 * b).sqrt();
        Ok(Self {
            sd: [
                s(vars.beta_sr),
                s(vars.beta_sdf),
                s(vars.beta_sdn),
                s(vars.beta_rdf),
                s(vars.beta_rdn),
                s(vars.beta_rr),
                s(vars.beta_li),
            ],
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ChannelRealization {
        let mut h = [Complex64::new(0.0, 0.0); 7];
        for (hi, sd) in h.iter_mut().zip(self.sd) {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            *hi = Complex64::new(sd * re, sd * im);
        }
        ChannelRealization::from_coefficients(h[0], h[1], h[2], h[3], h[4], h[5], h[6])
    }
}

/// Draws one realization: each coefficient is `CN(0, β_i)`.
pub fn sample<R: Rng + ?Sized>(vars: &LinkVariances, rng: &mut R) -> Result<ChannelRealization> {
    Ok(ChannelSampler::new(vars)?.sample(rng))
}

/// Independent random stream number `index` under `seed`.
pub fn substream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// CDF of the echo gain, `1 − exp(−√x/β)`.
pub fn rho_rr_cdf(x: f64, beta_rr: f64) -> Result<f64> {
    check(x, beta_rr, "rho_rr_cdf")?;
    Ok(-(-x.sqrt() / beta_rr).exp_m1())
}

/// Density of the echo gain, `exp(−√x/β) / (2β√x)`.
pub fn rho_rr_pdf(x: f64, beta_rr: f64) -> Result<f64> {
    check(x, beta_rr, "rho_rr_pdf")?;
    let s = x.sqrt();
    Ok((-s / beta_rr).exp() / (2.0 * beta_rr * s))
}

fn check(x: f64, beta: f64, func: &'static str) -> Result<()> {
    if !(x >= 0.0) {
        return Err(domain(func, format!("need x >= 0, got {x}")));
    }
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(domain(func, format!("need beta > 0, got {beta}")));
    }
    Ok(())
}
