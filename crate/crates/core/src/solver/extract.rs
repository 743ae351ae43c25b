use serde::Serialize;

use super::drivers::DriverPair;
use super::penalized::SolutionTriple;
use super::projection::project_z;
use crate::error::{Error, Result};
use crate::levy::ScenarioTree;
use crate::regulated::Barrier;

pub const K_MATCH_TOL: f64 = 1e-10;
pub const K_FAIL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Serialize)]
pub struct KReport {
    /// `E[K_{t_k}]` from the recomputed increments, `k = 0..=N`.
    pub mean_k: Vec<f64>,
    /// Largest `|recomputed - recorded|` over all increments.
    pub max_mismatch: f64,
    /// Largest martingale-projection residual met while recomputing.
    pub max_projection_residual: f64,
    /// Most negative recomputed increment (0 when `K` is nondecreasing).
    pub min_increment: f64,
    pub nondecreasing: bool,
    pub consistent: bool,
}

/// Recompute `K` as the residual of the discrete backward equation
///
/// `Y_{t_k} = E[Y_{t_{k+1}} | node] + f Δt + g ΔB + ΔK*_k + Δ_+K_k`,
/// split at `t_k+` into `Δ_+K_k = Y_{t_k} - Y_{t_k+}` and
/// `ΔK*_k = Y_{t_k+} - E[Y_{t_{k+1}}] - f Δt - g ΔB`, with `(ŷ, Z)` re-projected
/// from `Y_{t_{k+1}}`, and compare with the increments recorded by the solver.
pub fn extract_k(
    sol: &SolutionTriple,
    drivers: &DriverPair,
    tree: &ScenarioTree,
    barrier: &Barrier,
) -> Result<KReport> {
    if sol.scenarios.len() != tree.scenarios() || barrier.steps() != tree.steps() {
        return Err(Error::invalid("solution, barrier and tree do not match"));
    }
    let n = tree.steps();
    let dt = tree.dt();
    let mut max_mismatch: f64 = 0.0;
    let mut max_res: f64 = 0.0;
    let mut min_inc = f64::INFINITY;
    let mut mean_inc = vec![0.0; n];
    let mut next = vec![0.0; tree.n_outcomes()];

    for (s, scen) in sol.scenarios.iter().enumerate() {
        for k in 0..n {
            let t = tree.time(k);
            for node in 0..tree.nodes_at(k) {
                for (o, v) in next.iter_mut().enumerate() {
                    *v = scen.y[k + 1][tree.child(k, node, o)];
                }
                let proj = project_z(tree, &next)?;
                max_res = max_res.max(proj.residual);
                let drift = drivers.f(t, proj.yhat, &proj.z) * dt
                    + drivers.g(t, proj.yhat, &proj.z) * tree.db(s, k);
                let dk_plus = scen.y[k][node] - scen.y_plus[k][node];
                let dk_star = scen.y_plus[k][node] - proj.yhat - drift;
                max_mismatch = max_mismatch
                    .max((dk_plus - scen.dk_plus[k][node]).abs())
                    .max((dk_star - scen.dk_star[k][node]).abs());
                min_inc = min_inc.min(dk_plus).min(dk_star);
                mean_inc[k] += tree.reach_prob(k, node) * (dk_plus + dk_star);
            }
        }
    }
    if max_mismatch > K_FAIL_TOL {
        return Err(Error::InternalConsistency(format!(
            "recomputed K differs from the recorded K by {max_mismatch:e}"
        )));
    }
    let p = sol.scenarios.len() as f64;
    let mut mean_k = vec![0.0];
    for v in mean_inc {
        mean_k.push(mean_k.last().unwrap() + v / p);
    }
    let min_increment = min_inc.min(0.0);
    Ok(KReport {
        mean_k,
        max_mismatch,
        max_projection_residual: max_res,
        min_increment,
        nondecreasing: min_increment >= -K_MATCH_TOL,
        consistent: max_mismatch <= K_MATCH_TOL,
    })
}
