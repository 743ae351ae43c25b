use rayon::prelude::*;

use super::mertens::mertens_decompose;
use crate::error::{Error, Result};
use crate::levy::ScenarioTree;
use crate::regulated::Barrier;
use crate::solver::{backward, DriverPair, NodeState, SolutionTriple};

const FIXED_POINT_ITERS: usize = 200;

/// Discounted reward of one scenario for `f = f(t)`, `g = g(t)`:
/// `η(t_k) = ξ(t_k) + Σ_{j<k} (f(t_j) Δt + g(t_j) ΔB_j)` and the same sum with
/// `ξ(t_k+)` for stopping just after `t_k`.
#[derive(Debug, Clone)]
pub struct SnellInput {
    pub eta: Vec<Vec<f64>>,
    pub eta_plus: Vec<Vec<f64>>,
}

impl SnellInput {
    pub fn new(
        tree: &ScenarioTree,
        drivers: &DriverPair,
        barrier: &Barrier,
        scenario: usize,
    ) -> Result<Self> {
        if !(drivers.oracle_compatible() && drivers.f_spec().independent_of_y()) {
            return Err(Error::invalid("reward process needs f = f(t) and g = g(t)"));
        }
        let dt = tree.dt();
        let mut acc = 0.0;
        let mut eta = Vec::with_capacity(tree.steps() + 1);
        let mut eta_plus = Vec::with_capacity(tree.steps() + 1);
        for k in 0..=tree.steps() {
            let w = tree.nodes_at(k);
            eta.push((0..w).map(|i| barrier.value(k, i) + acc).collect());
            eta_plus.push((0..w).map(|i| barrier.right_limit(k, i) + acc).collect());
            if k < tree.steps() {
                let t = tree.time(k);
                acc += drivers.f(t, 0.0, &[]) * dt + drivers.g(t, 0.0, &[]) * tree.db(scenario, k);
            }
        }
        Ok(Self { eta, eta_plus })
    }
}

/// Root of `y = base + f(t, y) Δt` by fixed-point iteration.
fn implicit_continuation(drivers: &DriverPair, t: f64, base: f64, dt: f64) -> f64 {
    let z: [f64; 0] = [];
    if drivers.f_spec().independent_of_y() {
        return base + drivers.f(t, 0.0, &z) * dt;
    }
    let mut y = base + drivers.f(t, base, &z) * dt;
    for _ in 0..FIXED_POINT_ITERS {
        let next = base + drivers.f(t, y, &z) * dt;
        let done = (next - y).abs() <= 1e-15 * (1.0 + y.abs());
        y = next;
        if done {
            break;
        }
    }
    y
}

/// Discrete Snell envelope of the reflected equation with `f = f(t, y)` and
/// `g = g(t)`, implicit in `y`. `K` comes from the Mertens decomposition of the
/// envelope, `Z` from projecting it.
pub fn snell_oracle(
    tree: &ScenarioTree,
    drivers: &DriverPair,
    barrier: &Barrier,
) -> Result<SolutionTriple> {
    if !drivers.oracle_compatible() {
        return Err(Error::invalid(
            "the oracle needs f independent of z and g independent of (y, z)",
        ));
    }
    if barrier.steps() != tree.steps() {
        return Err(Error::invalid("barrier and tree have different grids"));
    }
    let dt = tree.dt();
    let lf = drivers.lipschitz_f();
    if lf * dt >= 1.0 {
        return Err(Error::StepSize(format!(
            "L_f·Δt = {} ≥ 1; increase the number of steps N",
            lf * dt
        )));
    }

    let scenarios = (0..tree.scenarios())
        .into_par_iter()
        .map(|s| {
            let mut drift: Vec<Vec<f64>> =
                (0..tree.steps()).map(|k| vec![0.0; tree.nodes_at(k)]).collect();
            let mut active = 0usize;
            let mut sol = backward(tree, barrier, s, |inp| {
                let noise = drivers.g(inp.t, 0.0, &[]) * tree.db(s, inp.k);
                let a = implicit_continuation(drivers, inp.t, inp.yhat + noise, dt);
                let y_plus = barrier.right_limit(inp.k, inp.node).max(a);
                let xi = barrier.value(inp.k, inp.node);
                let y = xi.max(y_plus);
                if y > y_plus {
                    active += 1;
                }
                drift[inp.k][inp.node] = drivers.f(inp.t, y_plus, &[]) * dt + noise;
                Ok(NodeState {
                    y,
                    y_plus,
                    dk_star: 0.0,
                    dk_plus: 0.0,
                })
            })?;
            let dec = mertens_decompose(tree, &sol.y, &sol.y_plus, Some(&drift))?;
            sol.dk_star = dec.dk_star;
            sol.dk_plus = dec.dk_plus;
            Ok((sol, active))
        })
        .collect::<Result<Vec<_>>>()?;

    let active_jump_nodes = scenarios.iter().map(|(_, a)| a).sum();
    Ok(SolutionTriple {
        penalty: None,
        scenarios: scenarios.into_iter().map(|(s, _)| s).collect(),
        active_jump_nodes,
    })
}
