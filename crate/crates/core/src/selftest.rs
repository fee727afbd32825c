//! Quick invariant suite behind the `selftest` command.

use serde::Serialize;

use crate::channel::ChannelRealization;
use crate::error::Result;
use crate::montecarlo::{estimate_outage, Device, McConfig};
use crate::opa::{a_n_dagger, grid_oracle, solve, Fixed, Scheme, Tolerances};
use crate::outage::{diversity_order, outage_far, outage_far_asymptotic, outage_near, outage_near_asymptotic};
use crate::rate::{ergodic_rate_far, ergodic_rates};
use crate::scenario::{derive_variances, Geometry, Mode, SystemParams};
use crate::sensing::{calibrate_threshold, false_alarm};
use crate::specfun::{echo_kernel, integrate, QuadratureSpec};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    Check { name, passed, detail }
}

fn kernel(_: &SystemParams, _: &Geometry) -> Result<Check> {
    let spec = QuadratureSpec::new(1e-14, 1e-12, 5000)?;
    let mut worst: f64 = 0.0;
    for &(b, c) in &[(0.05, 1e-4), (0.5, 0.3), (2.0, 10.0), (10.0, 1e3)] {
        let quad = 2.0 * integrate(|t| (-t / b - c * t * t).exp(), 0.0, f64::INFINITY, &spec)?;
        worst = worst.max(((echo_kernel(b, c)? - quad) / quad).abs());
    }
    let limit = (echo_kernel(0.3, 1e-14)? - 0.6).abs() / 0.6;
    Ok(check(
        "echo kernel vs quadrature",
        worst < 1e-9 && limit < 1e-6,
        format!("max rel err {worst:.2e}, small-c err {limit:.2e}"),
    ))
}

fn outage_mc(p: &SystemParams, geo: &Geometry) -> Result<Check> {
    let v = derive_variances(p, geo)?;
    let q = p.with_snr_db(20.0);
    let mc = McConfig::new(200_000, 1);
    let zf = estimate_outage(Device::Far, &q, &v, &mc)?.z_score(outage_far(&q, &v)?);
    let zn = estimate_outage(Device::Near, &q, &v, &mc)?.z_score(outage_near(&q, &v)?);
    Ok(check(
        "outage closed form vs simulation",
        zf.abs() < 4.0 && zn.abs() < 4.0,
        format!("z far {zf:.2}, z near {zn:.2}"),
    ))
}

fn high_snr(p: &SystemParams, geo: &Geometry) -> Result<Check> {
    let v = derive_variances(p, geo)?;
    let df = diversity_order(outage_far, p, &v, 50.0, 60.0)?;
    let dn = diversity_order(outage_near, p, &v, 50.0, 60.0)?;
    let q = p.with_snr_db(60.0);
    let rf = outage_far_asymptotic(&q, &v)? / outage_far(&q, &v)?;
    let rn = outage_near_asymptotic(&q, &v)? / outage_near(&q, &v)?;
    let ok = (df - 1.0).abs() <= 0.1
        && (dn - 1.0).abs() <= 0.1
        && (0.95..=1.05).contains(&rf)
        && (0.95..=1.05).contains(&rn);
    Ok(check(
        "diversity one and asymptotes",
        ok,
        format!("slopes {df:.3}/{dn:.3}, ratios {rf:.4}/{rn:.4}"),
    ))
}

fn nc_limit(p: &SystemParams, geo: &Geometry) -> Result<Check> {
    let v = derive_variances(p, geo)?;
    let q = p.with_mode(Mode::NonCooperative).with_snr_db(60.0);
    let r = ergodic_rate_far(&q, &v)?;
    let limit = (1.0 + q.a_f / q.a_n).log2();
    let err = (r / limit - 1.0).abs();
    Ok(check(
        "non-cooperative far-rate ceiling",
        err < 0.01,
        format!("{r:.5} vs {limit:.5}"),
    ))
}

fn threshold(p: &SystemParams, geo: &Geometry) -> Result<Check> {
    let v = derive_variances(p, geo)?;
    let g = ChannelRealization::mean_surrogate(&v)?;
    let mut worst: f64 = 0.0;
    for target in [1e-3, 1e-5] {
        let zeta = calibrate_threshold(p, &g, target)?;
        worst = worst.max((false_alarm(p, &g, zeta)? - target).abs() / target);
    }
    Ok(check(
        "threshold calibration round trip",
        worst < 1e-9,
        format!("max rel err {worst:.2e}"),
    ))
}

fn relay_position(p: &SystemParams, geo: &Geometry) -> Result<Check> {
    let sums = (1..20)
        .map(|i| {
            let g = Geometry::relay_on_line(0.25 * i as f64, 5.0, 6.0, 30f64.to_radians(), geo.d_rt)?;
            Ok(ergodic_rates(p, &derive_variances(p, &g)?)?.sum())
        })
        .collect::<Result<Vec<f64>>>()?;
    let peak = sums
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map_or(0, |m| m.0);
    let ok = peak > 0
        && peak < sums.len() - 1
        && sums[..=peak].windows(2).all(|w| w[1] > w[0])
        && sums[peak..].windows(2).all(|w| w[1] < w[0]);
    Ok(check(
        "sum rate unimodal in relay position",
        ok,
        format!("peak at d_sr = {}", 0.25 * (peak + 1) as f64),
    ))
}

fn optimizers(p: &SystemParams, geo: &Geometry) -> Result<Check> {
    let v = derive_variances(p, geo)?;
    let g = ChannelRealization::mean_surrogate(&v)?;
    let tol = Tolerances::default();
    let mut detail = format!("a_n dagger {}", a_n_dagger(p));
    let mut ok = a_n_dagger(p) == p.gamma_th_n / (p.gamma_th_f + p.gamma_th_n + p.gamma_th_f * p.gamma_th_n);
    for scheme in [Scheme::Scd, Scheme::Ccd] {
        let sol = solve(scheme, p, &g, &tol, Fixed::Free)?;
        let grid = grid_oracle(scheme, p, &g, 40)?;
        let beats = !grid.feasible || (sol.feasible && sol.objective >= grid.objective * (1.0 - 1e-6));
        ok &= beats;
        detail.push_str(&format!(
            ", {} {:.6e} vs grid {:.6e}",
            scheme.label(),
            sol.objective,
            grid.objective
        ));
    }
    Ok(check("optimizers dominate the grid", ok, detail))
}

type CheckFn = fn(&SystemParams, &Geometry) -> Result<Check>;

/// Runs every check on the given scenario. A check that errors is reported
/// as failed.
pub fn run(params: &SystemParams, geo: &Geometry) -> Vec<Check> {
    let checks: [(&'static str, CheckFn); 7] = [
        ("echo kernel vs quadrature", kernel),
        ("outage closed form vs simulation", outage_mc),
        ("diversity one and asymptotes", high_snr),
        ("non-cooperative far-rate ceiling", nc_limit),
        ("threshold calibration round trip", threshold),
        ("sum rate unimodal in relay position", relay_position),
        ("optimizers dominate the grid", optimizers),
    ];
    checks
        .iter()
        .map(|(name, f)| f(params, geo).unwrap_or_else(|e| check(name, false, e.to_string())))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::paper_defaults;

    #[test]
    fn defaults_pass() {
        let (p, g) = paper_defaults();
        let report = run(&p, &g);
        assert_eq!(report.len(), 7);
        for c in &report {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }

    #[test]
    fn errors_become_failures() {
        let (p, g) = paper_defaults();
        let broken = SystemParams { gamma_th_f: 10.0, ..p };
        let report = run(&broken, &g);
        assert!(report.iter().any(|c| !c.passed));
    }
}
