use super::{a_n_dagger, best_vertex, Fixed, Instance, Line, Multiplier, OpaSolution, Scheme, Tolerances};
use crate::channel::ChannelRealization;
use crate::error::{Error, Result};
use crate::scenario::SystemParams;

const GOLDEN_STEPS: usize = 80;
const DIAGNOSIS_POINTS: usize = 64;

#[derive(Debug, Clone, Copy)]
struct Point {
    f: f64,
    pc: f64,
    ps: f64,
    a: f64,
}

struct Solver {
    inst: Instance,
    tol: Tolerances,
    fixed: Fixed,
    a_lo: f64,
    a_hi: f64,
}

impl Solver {
    fn best_at(&self, a: f64) -> Option<Point> {
        if !(a >= self.a_lo && a <= self.a_hi) {
            return None;
        }
        let lines = self.inst.lines(a, self.fixed);
        best_vertex(&lines, |pc, ps| self.inst.objective(pc, ps, a)).map(|(f, pc, ps)| Point { f, pc, ps, a })
    }

    fn value_at(&self, a: f64) -> f64 {
        self.best_at(a).map_or(f64::NEG_INFINITY, |p| p.f)
    }

    fn a_grid(&self) -> Vec<f64> {
        if self.a_lo == self.a_hi {
            return vec![self.a_lo];
        }
        let n = self.tol.a_n_scan;
        let mut v: Vec<f64> = (0..n)
            .map(|i| self.a_lo + (self.a_hi - self.a_lo) * i as f64 / (n - 1) as f64)
            .collect();
        let dagger = a_n_dagger(&self.inst.params);
        if dagger > self.a_lo && dagger < self.a_hi {
            v.push(dagger);
        }
        v
    }

    /// Golden-section refinement of `g` on `[lo, hi]`, returning the best point seen.
    fn golden(g: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> (f64, f64) {
        let r = 0.5 * (5f64.sqrt() - 1.0);
        let mut x1 = hi - r * (hi - lo);
        let mut x2 = lo + r * (hi - lo);
        let (mut f1, mut f2) = (g(x1), g(x2));
        let mut best = if f1 >= f2 { (x1, f1) } else { (x2, f2) };
        for _ in 0..GOLDEN_STEPS {
            if f1 >= f2 {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - r * (hi - lo);
                f1 = g(x1);
                if f1 > best.1 {
                    best = (x1, f1);
                }
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + r * (hi - lo);
                f2 = g(x2);
                if f2 > best.1 {
                    best = (x2, f2);
                }
            }
            if hi - lo <= 1e-15 * hi.abs() {
                break;
            }
        }
        best
    }

    /// Best `a_n` for the block problem: coarse scan then golden refinement
    /// around the three best scan points.
    fn a_scan(&self) -> Option<Point> {
        let grid = self.a_grid();
        let mut scored: Vec<(usize, f64)> = grid.iter().map(|&a| self.value_at(a)).enumerate().collect();
        scored.retain(|s| s.1.is_finite());
        if scored.is_empty() {
            return None;
        }
        scored.sort_by(|x, y| y.1.total_cmp(&x.1));
        let n = self.tol.a_n_scan;
        let step = if n > 1 {
            (self.a_hi - self.a_lo) / (n - 1) as f64
        } else {
            0.0
        };
        let mut best = self.best_at(grid[scored[0].0])?;
        for &(i, _) in scored.iter().take(3) {
            let a = grid[i];
            if step == 0.0 {
                continue;
            }
            let lo = (a - step).max(self.a_lo);
            let hi = (a + step).min(self.a_hi);
            let (x, _) = Self::golden(|t| self.value_at(t), lo, hi);
            if let Some(p) = self.best_at(x) {
                if p.f > best.f {
                    best = p;
                }
            }
        }
        Some(best)
    }

    /// Best `a_n` at fixed powers.
    fn a_step(&self, p: Point) -> Point {
        if self.a_lo == self.a_hi {
            return p;
        }
        let (lo, hi) = self.inst.a_n_range(p.pc, p.ps);
        let (lo, hi) = (lo.max(self.a_lo), hi.min(self.a_hi));
        if !(lo <= hi) {
            return p;
        }
        let a = match self.inst.scheme {
            Scheme::Scd => {
                let dagger = a_n_dagger(&self.inst.params);
                if self.inst.is_feasible(p.pc, p.ps, dagger, self.tol.feasibility) {
                    dagger
                } else {
                    dagger.clamp(lo, hi)
                }
            }
            Scheme::Ccd => {
                let f_lo = self.inst.objective(p.pc, p.ps, lo);
                let (x, fx) = Self::golden(|t| self.inst.objective(p.pc, p.ps, t), lo, hi);
                if fx > f_lo {
                    x
                } else {
                    lo
                }
            }
        };
        let f = self.inst.objective(p.pc, p.ps, a);
        if f >= p.f {
            Point { f, a, ..p }
        } else {
            p
        }
    }

    /// One alternating sweep: powers at fixed `a_n`, then `a_n` at fixed powers.
    fn sweep(&self, p: Point) -> Point {
        let powers = self.best_at(p.a).filter(|q| q.f >= p.f).unwrap_or(p);
        self.a_step(powers)
    }

    fn start(&self) -> Option<Point> {
        let a0 = a_n_dagger(&self.inst.params).clamp(self.a_lo, self.a_hi);
        self.best_at(a0).or_else(|| self.a_scan())
    }

    fn run(&self) -> Result<OpaSolution> {
        let Some(mut p) = self.start() else {
            return Ok(OpaSolution::infeasible(self.inst.scheme, self.diagnose()));
        };
        let mut trace = vec![p.f];
        let mut polished = false;
        loop {
            if trace.len() > self.tol.max_sweeps {
                return Err(Error::NoConvergence {
                    iterations: trace.len() - 1,
                    trace,
                });
            }
            let next = self.sweep(p);
            let gain = next.f - p.f;
            p = next;
            trace.push(p.f);
            if gain > self.tol.rel_tol * p.f.abs() {
                continue;
            }
            if polished {
                break;
            }
            polished = true;
            if let Some(q) = self.a_scan() {
                if q.f > p.f * (1.0 + self.tol.rel_tol) {
                    p = q;
                    trace.push(p.f);
                    polished = false;
                }
            }
        }
        Ok(self.finish(p, trace))
    }

    fn finish(&self, p: Point, trace: Vec<f64>) -> OpaSolution {
        let inst = &self.inst;
        let violated: Vec<String> = inst
            .slacks(p.pc, p.ps, p.a)
            .into_iter()
            .filter(|&(_, s)| s < -self.tol.feasibility)
            .map(|(n, _)| n.to_string())
            .collect();
        let (multipliers, kkt_residual) = kkt(inst, &inst.lines(p.a, self.fixed), p);
        OpaSolution {
            scheme: inst.scheme,
            p_com: p.pc,
            p_sen: p.ps,
            a_n: p.a,
            objective: p.f,
            exact_sum_rate: (inst.scheme == Scheme::Ccd)
                .then(|| super::exact_sum_rate(&inst.params, &inst.g, p.pc, p.ps, p.a)),
            feasible: violated.is_empty(),
            violated,
            iterations: trace.len() - 1,
            trace,
            multipliers,
            kkt_residual,
        }
    }

    /// Names the constraints that cannot hold anywhere in the box, first
    /// alone, then in pairs.
    fn diagnose(&self) -> Vec<String> {
        let n = DIAGNOSIS_POINTS;
        let grid: Vec<f64> = if self.a_lo == self.a_hi {
            vec![self.a_lo]
        } else {
            (0..n)
                .map(|i| self.a_lo + (self.a_hi - self.a_lo) * i as f64 / (n - 1) as f64)
                .collect()
        };
        let split = |a: f64| {
            let lines = self.inst.lines(a, self.fixed);
            let (box_lines, cons): (Vec<Line>, Vec<Line>) = lines.into_iter().partition(|l| l.name.starts_with("p_"));
            (box_lines, cons)
        };
        let (box0, cons0) = split(grid[0]);
        if grid.iter().all(|&a| best_vertex(&split(a).0, |_, _| 0.0).is_none()) {
            return box0.iter().map(|l| l.name.to_string()).collect();
        }
        let feasible_with = |idx: &[usize]| {
            grid.iter().any(|&a| {
                let (mut lines, cons) = split(a);
                lines.extend(idx.iter().map(|&i| cons[i]));
                best_vertex(&lines, |_, _| 0.0).is_some()
            })
        };
        let alone: Vec<String> = (0..cons0.len())
            .filter(|&i| !feasible_with(&[i]))
            .map(|i| cons0[i].name.to_string())
            .collect();
        if !alone.is_empty() {
            return alone;
        }
        let mut pairs = Vec::new();
        for i in 0..cons0.len() {
            for j in i + 1..cons0.len() {
                if !feasible_with(&[i, j]) {
                    pairs.push(format!("{}+{}", cons0[i].name, cons0[j].name));
                }
            }
        }
        if pairs.is_empty() {
            vec!["jointly infeasible".to_string()]
        } else {
            pairs
        }
    }
}

/// Multipliers `λ ≥ 0` of the active half-planes with `∇f + Σ λ_i ∇h_i ≈ 0`.
fn kkt(inst: &Instance, lines: &[Line], p: Point) -> (Vec<Multiplier>, f64) {
    let grad = inst.gradient(p.pc, p.ps, p.a);
    let norm = grad.0.hypot(grad.1);
    if norm == 0.0 {
        return (Vec::new(), 0.0);
    }
    let active: Vec<&Line> = lines
        .iter()
        .filter(|l| {
            let scale = (l.a * p.pc).abs() + (l.b * p.ps).abs() + l.c.abs();
            (l.a * p.pc + l.b * p.ps - l.c).abs() <= 1e-7 * scale.max(f64::MIN_POSITIVE)
        })
        .collect();
    let residual = |lam: &[(f64, &Line)]| {
        let rx = grad.0 + lam.iter().map(|(v, l)| v * l.a).sum::<f64>();
        let ry = grad.1 + lam.iter().map(|(v, l)| v * l.b).sum::<f64>();
        rx.hypot(ry) / norm
    };
    let mut best: (Vec<(f64, &Line)>, f64) = (Vec::new(), 1.0);
    for l in &active {
        let nn = l.a * l.a + l.b * l.b;
        let v = (-(grad.0 * l.a + grad.1 * l.b) / nn).max(0.0);
        let r = residual(&[(v, l)]);
        if r < best.1 {
            best = (vec![(v, *l)], r);
        }
    }
    for i in 0..active.len() {
        for j in i + 1..active.len() {
            let (l, m) = (active[i], active[j]);
            let det = l.a * m.b - m.a * l.b;
            if det == 0.0 {
                continue;
            }
            let u = (-grad.0 * m.b + grad.1 * m.a) / det;
            let v = (-grad.1 * l.a + grad.0 * l.b) / det;
            if u < 0.0 || v < 0.0 {
                continue;
            }
            let r = residual(&[(u, l), (v, m)]);
            if r < best.1 {
                best = (vec![(u, l), (v, m)], r);
            }
        }
    }
    let mult = best
        .0
        .iter()
        .map(|(v, l)| Multiplier {
            constraint: l.name.to_string(),
            value: *v,
        })
        .collect();
    (mult, best.1)
}

/// Solves one scheme with optionally one variable held fixed.
pub fn solve(
    scheme: Scheme,
    params: &SystemParams,
    g: &ChannelRealization,
    tol: &Tolerances,
    fixed: Fixed,
) -> Result<OpaSolution> {
    tol.validate()?;
    let inst = Instance::new(scheme, params, g)?;
    let (a_lo, a_hi) = match fixed {
        Fixed::AN(a) => {
            if !(a > 0.0 && a < 0.5) {
                return Err(crate::error::domain(
                    "opa",
                    format!("fixed a_n must lie in (0, 0.5), got {a}"),
                ));
            }
            (a, a)
        }
        Fixed::PCom(x) | Fixed::PSen(x) if !(x >= 0.0 && x <= params.p_max) => {
            return Ok(OpaSolution::infeasible(
                scheme,
                vec![format!("fixed power {x} outside [0, p_max]")],
            ));
        }
        _ => (tol.sigma, 0.5 - tol.sigma),
    };
    Solver {
        inst,
        tol: *tol,
        fixed,
        a_lo,
        a_hi,
    }
    .run()
}

/// Maximizes the sensing SINR subject to the decoding constraints.
pub fn solve_scd(params: &SystemParams, g: &ChannelRealization, tol: &Tolerances) -> Result<OpaSolution> {
    solve(Scheme::Scd, params, g, tol, Fixed::Free)
}

/// Maximizes the high-SNR sum rate subject to decoding and sensing constraints.
pub fn solve_ccd(params: &SystemParams, g: &ChannelRealization, tol: &Tolerances) -> Result<OpaSolution> {
    solve(Scheme::Ccd, params, g, tol, Fixed::Free)
}

/// Solutions with one variable pinned: `P_com = P_sen = 15 dB` above noise
/// or `a_n = 0.2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Baselines {
    pub fixed_p_com: OpaSolution,
    pub fixed_p_sen: OpaSolution,
    pub fixed_a_n: OpaSolution,
}

pub const BASELINE_POWER_DB: f64 = 15.0;
pub const BASELINE_A_N: f64 = 0.2;

pub fn baselines(scheme: Scheme, params: &SystemParams, g: &ChannelRealization, tol: &Tolerances) -> Result<Baselines> {
    let p = params.n0 * crate::scenario::db_to_linear(BASELINE_POWER_DB);
    baselines_at(scheme, params, g, tol, p, BASELINE_A_N)
}

/// [`baselines`] with a chosen fixed power (linear) and fixed `a_n`.
pub fn baselines_at(
    scheme: Scheme,
    params: &SystemParams,
    g: &ChannelRealization,
    tol: &Tolerances,
    power: f64,
    a_n: f64,
) -> Result<Baselines> {
    Ok(Baselines {
        fixed_p_com: solve(scheme, params, g, tol, Fixed::PCom(power))?,
        fixed_p_sen: solve(scheme, params, g, tol, Fixed::PSen(power))?,
        fixed_a_n: solve(scheme, params, g, tol, Fixed::AN(a_n))?,
    })
}
