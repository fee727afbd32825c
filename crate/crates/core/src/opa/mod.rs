//! Optimal power allocation for one channel instance.
//!
//! With `a_n` fixed, every decoding and sensing constraint is a half-plane
//! `a·P_com + b·P_sen ≥ c`, so the feasible powers form a convex polygon.
//! The sensing SINR is linear-fractional and the high-SNR sum rate is
//! non-decreasing in both powers, so in either case the best point of the
//! polygon is one of its vertices. The solvers alternate closed-form
//! coordinate steps with an exact vertex search and a one-dimensional
//! search over `a_n`.

mod grid;
mod solver;

pub use grid::grid_oracle;
pub use solver::{baselines, baselines_at, solve, solve_ccd, solve_scd, Baselines, BASELINE_A_N, BASELINE_POWER_DB};

use serde::{Deserialize, Serialize};

use crate::channel::ChannelRealization;
use crate::error::{domain, Error, Result};
use crate::rate::achievable_rates;
use crate::scenario::{Mode, SystemParams};
use crate::sinr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// Maximize the sensing SINR under decoding constraints.
    Scd,
    /// Maximize the high-SNR sum rate under decoding and sensing constraints.
    Ccd,
}

impl Scheme {
    pub fn label(self) -> &'static str {
        match self {
            Scheme::Scd => "scd",
            Scheme::Ccd => "ccd",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Stop when a sweep improves the objective by less than this, relatively.
    pub rel_tol: f64,
    pub max_sweeps: usize,
    /// Keeps `a_n ≤ 0.5 − σ`.
    pub sigma: f64,
    /// Relative slack allowed on every constraint of the returned point.
    pub feasibility: f64,
    /// Points of the coarse `a_n` scan.
    pub a_n_scan: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rel_tol: 1e-9,
            max_sweeps: 100,
            sigma: 1e-6,
            feasibility: 1e-9,
            a_n_scan: 2048,
        }
    }
}

impl Tolerances {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) || self.max_sweeps == 0 || !(self.sigma > 0.0 && self.sigma < 0.5) {
            return Err(domain("Tolerances", format!("{self:?}")));
        }
        if !(self.feasibility >= 0.0) || self.a_n_scan < 2 {
            return Err(domain("Tolerances", format!("{self:?}")));
        }
        Ok(())
    }
}

/// Variable held fixed, for the comparison baselines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Fixed {
    Free,
    PCom(f64),
    PSen(f64),
    AN(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Multiplier {
    pub constraint: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpaSolution {
    pub scheme: Scheme,
    pub p_com: f64,
    pub p_sen: f64,
    pub a_n: f64,
    /// Sensing SINR (linear) for SCD, high-SNR sum rate in bits/s/Hz for CCD.
    pub objective: f64,
    /// Instantaneous achievable sum rate at the returned point (CCD only).
    pub exact_sum_rate: Option<f64>,
    pub feasible: bool,
    pub violated: Vec<String>,
    pub iterations: usize,
    pub trace: Vec<f64>,
    /// Multipliers of the active constraints at the returned powers.
    pub multipliers: Vec<Multiplier>,
    /// `|∇f + Σλ∇g| / |∇f|` for those multipliers.
    pub kkt_residual: f64,
}

impl OpaSolution {
    fn infeasible(scheme: Scheme, violated: Vec<String>) -> Self {
        Self {
            scheme,
            p_com: f64::NAN,
            p_sen: f64::NAN,
            a_n: f64::NAN,
            objective: f64::NAN,
            exact_sum_rate: None,
            feasible: false,
            violated,
            iterations: 0,
            trace: Vec::new(),
            multipliers: Vec::new(),
            kkt_residual: f64::NAN,
        }
    }

    /// `Err(Error::Infeasible)` for an infeasible verdict.
    pub fn into_result(self) -> Result<Self> {
        if self.feasible {
            Ok(self)
        } else {
            Err(Error::Infeasible {
                violated: self.violated,
            })
        }
    }
}

/// Power split that equalizes the two decoding thresholds:
/// `γ_th_n / (γ_th_f + γ_th_n + γ_th_f γ_th_n)`.
pub fn a_n_dagger(params: &SystemParams) -> f64 {
    let (tf, tn) = (params.gamma_th_f, params.gamma_th_n);
    tn / (tf + tn + tf * tn)
}

/// Half-plane `a·P_com + b·P_sen ≥ c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Line {
    pub name: &'static str,
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Line {
    fn slack(&self, pc: f64, ps: f64) -> f64 {
        self.a * pc + self.b * ps - self.c
    }

    fn holds(&self, pc: f64, ps: f64, tol: f64) -> bool {
        let scale = (self.a * pc).abs() + (self.b * ps).abs() + self.c.abs();
        self.slack(pc, ps) >= -tol * scale
    }
}

fn intersect(l: &Line, m: &Line) -> Option<(f64, f64)> {
    let det = l.a * m.b - m.a * l.b;
    if det.abs() <= 1e-14 * ((l.a * m.b).abs() + (m.a * l.b).abs()) {
        return None;
    }
    // axis-aligned lines give exact coordinates
    let p = match (l.a == 0.0, l.b == 0.0, m.a == 0.0, m.b == 0.0) {
        (_, true, true, _) => (l.c / l.a, m.c / m.b),
        (true, _, _, true) => (m.c / m.a, l.c / l.b),
        (_, true, _, _) => {
            let x = l.c / l.a;
            (x, (m.c - m.a * x) / m.b)
        }
        (true, _, _, _) => {
            let y = l.c / l.b;
            ((m.c - m.b * y) / m.a, y)
        }
        (_, _, _, true) => {
            let x = m.c / m.a;
            (x, (l.c - l.a * x) / l.b)
        }
        (_, _, true, _) => {
            let y = m.c / m.b;
            ((l.c - l.b * y) / l.a, y)
        }
        _ => ((l.c * m.b - m.c * l.b) / det, (l.a * m.c - m.a * l.c) / det),
    };
    (p.0.is_finite() && p.1.is_finite()).then_some(p)
}

const VERTEX_TOL: f64 = 1e-12;

/// Best vertex of the polygon cut out by `lines`, as `(objective, P_com, P_sen)`.
pub(crate) fn best_vertex(lines: &[Line], f: impl Fn(f64, f64) -> f64) -> Option<(f64, f64, f64)> {
    let mut best: Option<(f64, f64, f64)> = None;
    for i in 0..lines.len() {
        for j in i + 1..lines.len() {
            let Some((pc, ps)) = intersect(&lines[i], &lines[j]) else {
                continue;
            };
            if !lines.iter().all(|l| l.holds(pc, ps, VERTEX_TOL)) {
                continue;
            }
            let v = f(pc, ps);
            if best.is_none_or(|b| v > b.0) {
                best = Some((v, pc, ps));
            }
        }
    }
    best
}

/// One optimization instance: parameters, gains and scheme.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Instance {
    pub scheme: Scheme,
    pub params: SystemParams,
    pub g: ChannelRealization,
}

impl Instance {
    pub fn new(scheme: Scheme, params: &SystemParams, g: &ChannelRealization) -> Result<Self> {
        params.validate()?;
        if params.mode == Mode::NonCooperative {
            return Err(Error::InvalidParams(
                "power allocation needs a relay (fd or hd mode)".into(),
            ));
        }
        let gains = [g.rho_sr, g.rho_sdf, g.rho_sdn, g.rho_rdf, g.rho_rdn, g.rho_rr, g.rho_li];
        if gains.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(domain("opa", "channel gains must be finite and non-negative"));
        }
        Ok(Self {
            scheme,
            params: *params,
            g: *g,
        })
    }

    /// Echo plus loop interference gain at the relay, `δρ_RR + ωρ_LI`.
    pub fn l2(&self) -> f64 {
        self.params.delta * self.g.rho_rr + self.params.omega * self.g.rho_li
    }

    pub fn objective(&self, pc: f64, ps: f64, a_n: f64) -> f64 {
        match self.scheme {
            Scheme::Scd => sensing_sinr(&self.params, &self.g, pc, ps),
            Scheme::Ccd => sum_rate_surrogate(&self.params, &self.g, pc, ps, a_n),
        }
    }

    /// `∂f/∂P_com`, `∂f/∂P_sen` at fixed `a_n`.
    pub fn gradient(&self, pc: f64, ps: f64, a_n: f64) -> (f64, f64) {
        let (p, g) = (&self.params, &self.g);
        match self.scheme {
            Scheme::Scd => {
                let den = g.rho_sr * pc + p.omega * g.rho_li * ps + p.n0;
                let num = p.delta * g.rho_rr;
                (
                    -num * ps * g.rho_sr / (den * den),
                    num * (g.rho_sr * pc + p.n0) / (den * den),
                )
            }
            Scheme::Ccd => {
                let ln2 = std::f64::consts::LN_2;
                let f2 = a_n * g.rho_rdn * ps + p.n0;
                let f3 = a_n * g.rho_sdn * pc + p.n0;
                let relay_limited = a_n * g.rho_sr / self.l2() <= a_n * g.rho_rdn * ps / p.n0;
                let d_ps = if relay_limited {
                    0.0
                } else {
                    a_n * g.rho_rdn / (f2 * ln2)
                };
                (a_n * g.rho_sdn / (f3 * ln2), d_ps)
            }
        }
    }

    /// Constraint half-planes at fixed `a_n`, box included.
    pub fn lines(&self, a_n: f64, fixed: Fixed) -> Vec<Line> {
        let (p, g) = (&self.params, &self.g);
        let (tf, tn, n0) = (p.gamma_th_f, p.gamma_th_n, p.n0);
        let a_f = 1.0 - a_n;
        let mf = a_f - a_n * tf;
        let l2 = self.l2();
        let mut v = vec![
            Line {
                name: "sr_xf",
                a: mf * g.rho_sr,
                b: -tf * l2,
                c: tf * n0,
            },
            Line {
                name: "rdf_xf",
                a: 0.0,
                b: mf * g.rho_rdf,
                c: tf * n0,
            },
            Line {
                name: "rdn_xf",
                a: 0.0,
                b: mf * g.rho_rdn,
                c: tf * n0,
            },
            Line {
                name: "sr_xn",
                a: a_n * g.rho_sr,
                b: -tn * l2,
                c: tn * n0,
            },
            Line {
                name: "rdn_xn",
                a: 0.0,
                b: a_n * g.rho_rdn,
                c: tn * n0,
            },
        ];
        if self.scheme == Scheme::Ccd {
            let k = p.kappa;
            v.extend([
                Line {
                    name: "sdf_xf",
                    a: mf * g.rho_sdf,
                    b: 0.0,
                    c: tf * n0,
                },
                Line {
                    name: "sdn_xf",
                    a: mf * g.rho_sdn,
                    b: 0.0,
                    c: tf * n0,
                },
                Line {
                    name: "sdn_xn",
                    a: a_n * g.rho_sdn,
                    b: 0.0,
                    c: tn * n0,
                },
                Line {
                    name: "sensing",
                    a: -k * g.rho_sr,
                    b: p.delta * g.rho_rr - k * p.omega * g.rho_li,
                    c: k * n0,
                },
            ]);
        }
        let (pc_lo, pc_hi) = match fixed {
            Fixed::PCom(x) => (x, x),
            _ => (0.0, p.p_max),
        };
        let (ps_lo, ps_hi) = match fixed {
            Fixed::PSen(x) => (x, x),
            _ => (0.0, p.p_max),
        };
        v.extend([
            Line {
                name: "p_com_min",
                a: 1.0,
                b: 0.0,
                c: pc_lo,
            },
            Line {
                name: "p_com_max",
                a: -1.0,
                b: 0.0,
                c: -pc_hi,
            },
            Line {
                name: "p_sen_min",
                a: 0.0,
                b: 1.0,
                c: ps_lo,
            },
            Line {
                name: "p_sen_max",
                a: 0.0,
                b: -1.0,
                c: -ps_hi,
            },
        ]);
        v
    }

    /// Range of `a_n` satisfying every decoding constraint at fixed powers.
    ///
    /// `x_f` constraints bound `a_n` from above, `x_n` constraints from below.
    pub fn a_n_range(&self, pc: f64, ps: f64) -> (f64, f64) {
        let (p, g) = (&self.params, &self.g);
        let (tf, tn, n0) = (p.gamma_th_f, p.gamma_th_n, p.n0);
        let relay_in = self.l2() * ps + n0;
        let upper = |s: f64, d: f64| (s - tf * d) / (s * (1.0 + tf));
        let lower = |s: f64, d: f64| tn * d / s;
        let mut hi = upper(g.rho_sr * pc, relay_in)
            .min(upper(g.rho_rdf * ps, n0))
            .min(upper(g.rho_rdn * ps, n0));
        let mut lo = lower(g.rho_sr * pc, relay_in).max(lower(g.rho_rdn * ps, n0));
        if self.scheme == Scheme::Ccd {
            hi = hi.min(upper(g.rho_sdf * pc, n0)).min(upper(g.rho_sdn * pc, n0));
            lo = lo.max(lower(g.rho_sdn * pc, n0));
        }
        (
            if lo.is_nan() { f64::INFINITY } else { lo },
            if hi.is_nan() { f64::NEG_INFINITY } else { hi },
        )
    }

    /// Relative slack of every constraint, evaluated from the SINRs directly.
    pub fn slacks(&self, pc: f64, ps: f64, a_n: f64) -> Vec<(&'static str, f64)> {
        let q = SystemParams {
            p_com: pc,
            p_sen: ps,
            ..self.params
        }
        .with_a_n(a_n);
        let s = sinr::evaluate(&q, &self.g);
        let (tf, tn) = (q.gamma_th_f, q.gamma_th_n);
        let pmax = q.p_max;
        let mut v = vec![
            ("sr_xf", s.sr_xf / tf - 1.0),
            ("rdf_xf", s.rdf_xf / tf - 1.0),
            ("rdn_xf", s.rdn_xf / tf - 1.0),
            ("sr_xn", s.sr_xn / tn - 1.0),
            ("rdn_xn", s.rdn_xn / tn - 1.0),
        ];
        if self.scheme == Scheme::Ccd {
            v.extend([
                ("sdf_xf", s.sdf_xf / tf - 1.0),
                ("sdn_xf", s.sdn_xf / tf - 1.0),
                ("sdn_xn", s.sdn_xn / tn - 1.0),
                ("sensing", s.sense / q.kappa - 1.0),
            ]);
        }
        v.extend([
            ("p_com_min", pc / pmax),
            ("p_com_max", 1.0 - pc / pmax),
            ("p_sen_min", ps / pmax),
            ("p_sen_max", 1.0 - ps / pmax),
            ("a_n_min", a_n),
            ("a_n_below_a_f", (1.0 - a_n) - a_n),
        ]);
        v
    }

    pub fn is_feasible(&self, pc: f64, ps: f64, a_n: f64, tol: f64) -> bool {
        self.slacks(pc, ps, a_n).iter().all(|&(_, s)| s >= -tol)
    }
}

/// Relative slack of every constraint of `scheme` at an allocation,
/// computed from the SINRs. Negative entries are violations.
pub fn constraint_slacks(
    scheme: Scheme,
    params: &SystemParams,
    g: &ChannelRealization,
    p_com: f64,
    p_sen: f64,
    a_n: f64,
) -> Result<Vec<(&'static str, f64)>> {
    Ok(Instance::new(scheme, params, g)?.slacks(p_com, p_sen, a_n))
}

/// Received SINR of the sensing echo at the relay.
pub fn sensing_sinr(params: &SystemParams, g: &ChannelRealization, p_com: f64, p_sen: f64) -> f64 {
    params.delta * g.rho_rr * p_sen / (g.rho_sr * p_com + g.rho_li * params.omega * p_sen + params.n0)
}

/// High-SNR sum-rate surrogate used by the rate-centric design.
pub fn sum_rate_surrogate(params: &SystemParams, g: &ChannelRealization, p_com: f64, p_sen: f64, a_n: f64) -> f64 {
    let a_f = 1.0 - a_n;
    let l2 = params.delta * g.rho_rr + params.omega * g.rho_li;
    let ratio = a_f / a_n;
    let t1 = (a_f * g.rho_sr / (a_n * g.rho_sr + l2)).min(ratio);
    let t3 = (a_n * g.rho_sr / l2).min(a_n * g.rho_rdn * p_sen / params.n0);
    let t4 = a_n * g.rho_sdn * p_com / params.n0;
    (t1.ln_1p() + ratio.ln_1p() + t3.ln_1p() + t4.ln_1p()) / std::f64::consts::LN_2
}

/// Instantaneous achievable sum rate at an allocation.
pub fn exact_sum_rate(params: &SystemParams, g: &ChannelRealization, p_com: f64, p_sen: f64, a_n: f64) -> f64 {
    let q = SystemParams {
        p_com,
        p_sen,
        ..*params
    }
    .with_a_n(a_n);
    achievable_rates(&q, g).sum()
}

/// Bounds of the sensing-centric design at a given `a_n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScdDerived {
    pub theta1_star: f64,
    pub theta2_star: f64,
    pub theta_star: f64,
    /// `θ*/ρ_SR`: the source must send `P_com ≥ θ′((δρ_RR+ωρ_LI)P_sen + N0)`.
    pub theta_prime: f64,
    pub c11: f64,
    pub c12: f64,
    /// Least sensing power the relay links need.
    pub c1: f64,
    pub a_n_dagger: f64,
}

pub fn scd_derived(params: &SystemParams, g: &ChannelRealization, a_n: f64) -> ScdDerived {
    let (tf, tn, n0) = (params.gamma_th_f, params.gamma_th_n, params.n0);
    let theta1_star = tf / ((1.0 - a_n) - a_n * tf);
    let theta2_star = tn / a_n;
    let theta_star = theta1_star.max(theta2_star);
    let c11 = n0 * theta_star / g.rho_rdn;
    let c12 = n0 * theta1_star / g.rho_rdf;
    ScdDerived {
        theta1_star,
        theta2_star,
        theta_star,
        theta_prime: theta_star / g.rho_sr,
        c11,
        c12,
        c1: c11.max(c12),
        a_n_dagger: a_n_dagger(params),
    }
}

/// Largest sensing power allowed by the source link at fixed `P_com`.
pub fn scd_p_sen_step(params: &SystemParams, g: &ChannelRealization, p_com: f64, a_n: f64) -> f64 {
    let d = scd_derived(params, g, a_n);
    let l2 = params.delta * g.rho_rr + params.omega * g.rho_li;
    let bound = (p_com - params.n0 * d.theta_prime) / (l2 * d.theta_prime);
    params.p_max.min(bound)
}

/// Least source power that keeps the relay decoding at fixed `P_sen`.
pub fn scd_p_com_step(params: &SystemParams, g: &ChannelRealization, p_sen: f64, a_n: f64) -> f64 {
    let d = scd_derived(params, g, a_n);
    let l2 = params.delta * g.rho_rr + params.omega * g.rho_li;
    (l2 * d.theta_prime * p_sen + params.n0 * d.theta_prime).min(params.p_max)
}

/// Quantities of the rate-centric design at a given allocation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CcdDerived {
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
    pub l4: f64,
    pub f1: f64,
    pub f2: f64,
    pub f3: f64,
    /// Least source power the direct links need.
    pub c1: f64,
    /// Least `a_n` that decodes `x_n` everywhere.
    pub c2: f64,
    /// Largest `a_n` that decodes `x_f` everywhere.
    pub c3: f64,
}

pub fn ccd_derived(params: &SystemParams, g: &ChannelRealization, p_com: f64, p_sen: f64, a_n: f64) -> CcdDerived {
    let (tf, tn, n0) = (params.gamma_th_f, params.gamma_th_n, params.n0);
    let a_f = 1.0 - a_n;
    let l2 = params.delta * g.rho_rr + params.omega * g.rho_li;
    let c11 = n0 * tf / ((a_f - a_n * tf) * g.rho_sdf);
    let c12 = n0 * tf / ((a_f - a_n * tf) * g.rho_sdn);
    let c13 = n0 * tn / (a_n * g.rho_sdn);
    let c21 = (l2 * p_sen + n0) * tn / (g.rho_sr * p_com);
    let c22 = n0 * tn / (g.rho_sdn * p_com);
    let c23 = n0 * tn / (g.rho_rdn * p_sen);
    let g1 = |rho: f64| (p_com * rho - n0 * tf) / (p_com * rho * (1.0 + tf));
    let g2 = |rho: f64| (p_sen * rho - n0 * tf) / (p_sen * rho * (1.0 + tf));
    let c35 = (p_com * g.rho_sr - l2 * p_sen * tf - n0 * tf) / (p_com * g.rho_sr * (1.0 + tf));
    CcdDerived {
        l1: g.rho_sr + l2,
        l2,
        l3: (a_f - a_n * tf) * g.rho_sr,
        l4: params.delta * g.rho_rr - params.kappa * params.omega * g.rho_li,
        f1: a_n * g.rho_sr + l2,
        f2: a_n * g.rho_rdn * p_sen + n0,
        f3: a_n * g.rho_sdn * p_com + n0,
        c1: c11.max(c12).max(c13),
        c2: c21.max(c22).max(c23),
        c3: g1(g.rho_sdf)
            .min(g1(g.rho_sdn))
            .min(g2(g.rho_rdf))
            .min(g2(g.rho_rdn))
            .min(c35),
    }
}
