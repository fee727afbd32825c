use rayon::prelude::*;

use super::{sensing_sinr, sum_rate_surrogate, OpaSolution, Scheme};
use crate::channel::ChannelRealization;
use crate::error::{domain, Result};
use crate::scenario::SystemParams;
use crate::sinr;

fn feasible(scheme: Scheme, q: &SystemParams, g: &ChannelRealization) -> bool {
    let s = sinr::evaluate(q, g);
    let (tf, tn) = (q.gamma_th_f, q.gamma_th_n);
    let relay = s.sr_xf >= tf && s.rdf_xf >= tf && s.rdn_xf >= tf && s.sr_xn >= tn && s.rdn_xn >= tn;
    match scheme {
        Scheme::Scd => relay,
        Scheme::Ccd => relay && s.sdf_xf >= tf && s.sdn_xf >= tf && s.sdn_xn >= tn && s.sense >= q.kappa,
    }
}

/// Exhaustive search over `a_n = 0.5(i+1)/(n+1)` and `P_com, P_sen` on
/// `n` evenly spaced points of `[0, P_max]`, with every constraint checked
/// on the SINRs themselves.
pub fn grid_oracle(
    scheme: Scheme,
    params: &SystemParams,
    g: &ChannelRealization,
    resolution: usize,
) -> Result<OpaSolution> {
    if resolution < 2 {
        return Err(domain(
            "grid_oracle",
            format!("resolution must be >= 2, got {resolution}"),
        ));
    }
    params.validate()?;
    let n = resolution;
    let power = |i: usize| params.p_max * i as f64 / (n - 1) as f64;
    let best = (0..n)
        .into_par_iter()
        .filter_map(|i| {
            let a = 0.5 * (i + 1) as f64 / (n + 1) as f64;
            let mut best: Option<(f64, f64, f64, f64)> = None;
            for j in 0..n {
                for k in 0..n {
                    let (pc, ps) = (power(j), power(k));
                    let q = SystemParams {
                        p_com: pc,
                        p_sen: ps,
                        ..*params
                    }
                    .with_a_n(a);
                    if !feasible(scheme, &q, g) {
                        continue;
                    }
                    let f = match scheme {
                        Scheme::Scd => sensing_sinr(params, g, pc, ps),
                        Scheme::Ccd => sum_rate_surrogate(params, g, pc, ps, a),
                    };
                    if best.is_none_or(|b| f > b.0) {
                        best = Some((f, pc, ps, a));
                    }
                }
            }
            best
        })
        .reduce_with(|x, y| if y.0 > x.0 { y } else { x });
    let Some((f, pc, ps, a)) = best else {
        return Ok(OpaSolution::infeasible(
            scheme,
            vec!["no feasible grid point".to_string()],
        ));
    };
    Ok(OpaSolution {
        scheme,
        p_com: pc,
        p_sen: ps,
        a_n: a,
        objective: f,
        exact_sum_rate: (scheme == Scheme::Ccd).then(|| super::exact_sum_rate(params, g, pc, ps, a)),
        feasible: true,
        violated: Vec::new(),
        iterations: 0,
        trace: Vec::new(),
        multipliers: Vec::new(),
        kkt_residual: f64::NAN,
    })
}
