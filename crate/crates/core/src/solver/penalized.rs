use rayon::prelude::*;
use serde::Serialize;

use super::drivers::DriverPair;
use super::projection::project_z;
use crate::error::{Error, Result};
use crate::levy::ScenarioTree;
use crate::regulated::Barrier;

/// Penalty stiffness above which the implicit step is flagged.
pub const STIFF_PENALTY: f64 = 1e4;

/// Solution of one Brownian scenario on the lattice.
///
/// Index `[k][node]`. `z`, `yhat`, `dk_star` and `dk_plus` live on
/// `k < N`; `z[k]` is predictable, i.e. it is the integrand on `(t_k, t_{k+1}]`,
/// stored flat with `m` entries per node.
#[derive(Debug, Clone, Serialize)]
pub struct ScenarioSolution {
    pub y: Vec<Vec<f64>>,
    pub y_plus: Vec<Vec<f64>>,
    pub yhat: Vec<Vec<f64>>,
    pub z: Vec<Vec<f64>>,
    pub dk_star: Vec<Vec<f64>>,
    pub dk_plus: Vec<Vec<f64>>,
    pub proj_residual: f64,
    dim: usize,
}

impl ScenarioSolution {
    pub fn z_at(&self, k: usize, node: usize) -> &[f64] {
        &self.z[k][node * self.dim..(node + 1) * self.dim]
    }

    pub fn steps(&self) -> usize {
        self.y.len() - 1
    }
}

/// `(Y, Z, K)` for every scenario; `K` is stored through its increments.
#[derive(Debug, Clone, Serialize)]
pub struct SolutionTriple {
    pub penalty: Option<u64>,
    pub scenarios: Vec<ScenarioSolution>,
    /// Number of nodes where the right-jump correction was applied.
    pub active_jump_nodes: usize,
}

impl SolutionTriple {
    /// `Y = Z = K = 0` on every node; the starting point of a Picard loop.
    pub fn zeros(tree: &ScenarioTree) -> Self {
        let n = tree.steps();
        let m = tree.dim();
        let level = |k: usize| vec![0.0; tree.nodes_at(k)];
        let scen = ScenarioSolution {
            y: (0..=n).map(level).collect(),
            y_plus: (0..=n).map(level).collect(),
            yhat: (0..n).map(level).collect(),
            z: (0..n).map(|k| vec![0.0; tree.nodes_at(k) * m]).collect(),
            dk_star: (0..n).map(level).collect(),
            dk_plus: (0..n).map(level).collect(),
            proj_residual: 0.0,
            dim: m,
        };
        Self {
            penalty: None,
            scenarios: vec![scen; tree.scenarios()],
            active_jump_nodes: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.scenarios.first().map_or(0, |s| s.dim)
    }

    /// Scenario average of `Y_0`.
    pub fn y0_mean(&self) -> f64 {
        self.scenarios.iter().map(|s| s.y[0][0]).sum::<f64>() / self.scenarios.len() as f64
    }

    /// `E[value(s, k, node)]` at every grid time, averaged over scenarios
    /// and weighted by lattice reach probabilities.
    pub fn expected<F>(&self, tree: &ScenarioTree, upto: usize, value: F) -> Vec<f64>
    where
        F: Fn(&ScenarioSolution, usize, usize) -> f64,
    {
        let p = self.scenarios.len() as f64;
        (0..upto)
            .map(|k| {
                self.scenarios
                    .iter()
                    .map(|s| {
                        (0..tree.nodes_at(k))
                            .map(|i| tree.reach_prob(k, i) * value(s, k, i))
                            .sum::<f64>()
                    })
                    .sum::<f64>()
                    / p
            })
            .collect()
    }

    /// `E[K_{t_k}]` for `k = 0..=N`, with `K_{t_k} = Σ_{j<k} (ΔK*_j + Δ_+K_j)`.
    pub fn expected_k(&self, tree: &ScenarioTree) -> Vec<f64> {
        let inc = self.expected(tree, tree.steps(), |s, k, i| s.dk_star[k][i] + s.dk_plus[k][i]);
        let mut out = vec![0.0];
        for v in inc {
            out.push(out.last().unwrap() + v);
        }
        out
    }

    /// Largest node-wise `|Y - Y'|` over values and right limits.
    pub fn max_abs_diff(&self, other: &SolutionTriple) -> f64 {
        self.scenarios
            .iter()
            .zip(&other.scenarios)
            .flat_map(|(a, b)| {
                let ys = a.y.iter().flatten().zip(b.y.iter().flatten());
                let yp = a.y_plus.iter().flatten().zip(b.y_plus.iter().flatten());
                ys.chain(yp).map(|(u, v)| (u - v).abs())
            })
            .fold(0.0, f64::max)
    }

    /// Largest node-wise `Y - Y'` (positive where `self` exceeds `other`).
    pub fn max_excess_over(&self, other: &SolutionTriple) -> f64 {
        self.scenarios
            .iter()
            .zip(&other.scenarios)
            .flat_map(|(a, b)| {
                let ys = a.y.iter().flatten().zip(b.y.iter().flatten());
                let yp = a.y_plus.iter().flatten().zip(b.y_plus.iter().flatten());
                ys.chain(yp).map(|(u, v)| u - v)
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `max (ξ - Y)^+` over values and right limits.
    pub fn barrier_violation(&self, barrier: &Barrier) -> f64 {
        self.scenarios
            .iter()
            .flat_map(|s| {
                s.y.iter().enumerate().flat_map(move |(k, row)| {
                    row.iter().enumerate().map(move |(i, y)| {
                        let a = barrier.value(k, i) - y;
                        let b = barrier.right_limit(k, i) - s.y_plus[k][i];
                        a.max(b)
                    })
                })
            })
            .fold(0.0, f64::max)
    }
}

/// What a backward step sees at a node.
#[derive(Debug, Clone, Copy)]
pub(crate) struct StepInput<'a> {
    pub k: usize,
    pub node: usize,
    pub t: f64,
    pub yhat: f64,
    pub z: &'a [f64],
    pub db: f64,
}

/// What a backward step produces at a node.
#[derive(Debug, Clone, Copy)]
pub(crate) struct NodeState {
    pub y: f64,
    pub y_plus: f64,
    pub dk_star: f64,
    pub dk_plus: f64,
}

/// Backward recursion shared by the penalized scheme and the Snell oracle:
/// `Y_N = ξ_N`, then for each node project `Y_{k+1}` and hand the conditional
/// mean and `Z` to `step`.
pub(crate) fn backward<F>(
    tree: &ScenarioTree,
    barrier: &Barrier,
    scenario: usize,
    mut step: F,
) -> Result<ScenarioSolution>
where
    F: FnMut(StepInput<'_>) -> Result<NodeState>,
{
    let n = tree.steps();
    let m = tree.dim();
    let outcomes = tree.n_outcomes();
    let mut y = vec![Vec::new(); n + 1];
    let mut y_plus = vec![Vec::new(); n + 1];
    let mut yhat = vec![Vec::new(); n];
    let mut z = vec![Vec::new(); n];
    let mut dk_star = vec![Vec::new(); n];
    let mut dk_plus = vec![Vec::new(); n];
    let mut proj_residual: f64 = 0.0;

    y[n] = (0..tree.nodes_at(n)).map(|i| barrier.value(n, i)).collect();
    y_plus[n] = y[n].clone();

    let mut next = vec![0.0; outcomes];
    for k in (0..n).rev() {
        let width = tree.nodes_at(k);
        let (mut yk, mut ypk, mut hk, mut kk, mut dsk, mut dpk) = (
            Vec::with_capacity(width),
            Vec::with_capacity(width),
            Vec::with_capacity(width),
            Vec::with_capacity(width * m),
            Vec::with_capacity(width),
            Vec::with_capacity(width),
        );
        for node in 0..width {
            for (o, v) in next.iter_mut().enumerate() {
                *v = y[k + 1][tree.child(k, node, o)];
            }
            let proj = project_z(tree, &next)?;
            proj_residual = proj_residual.max(proj.residual);
            let st = step(StepInput {
                k,
                node,
                t: tree.time(k),
                yhat: proj.yhat,
                z: &proj.z,
                db: tree.db(scenario, k),
            })?;
            if !(st.y.is_finite() && st.y_plus.is_finite()) {
                return Err(Error::NonFinite {
                    scenario,
                    step: k,
                    node,
                });
            }
            yk.push(st.y);
            ypk.push(st.y_plus);
            hk.push(proj.yhat);
            kk.extend_from_slice(&proj.z);
            dsk.push(st.dk_star);
            dpk.push(st.dk_plus);
        }
        y[k] = yk;
        y_plus[k] = ypk;
        yhat[k] = hk;
        z[k] = kk;
        dk_star[k] = dsk;
        dk_plus[k] = dpk;
    }
    Ok(ScenarioSolution {
        y,
        y_plus,
        yhat,
        z,
        dk_star,
        dk_plus,
        proj_residual,
        dim: m,
    })
}

/// Unique root of `y = a + c (y - ξ)^-`, `c = nΔt ≥ 0`.
#[inline]
pub fn implicit_penalty_step(a: f64, barrier: f64, c: f64) -> f64 {
    if a >= barrier {
        a
    } else {
        (a + c * barrier) / (1.0 + c)
    }
}

/// Source of the `dB` coefficient during a solve.
#[derive(Debug, Clone, Copy)]
pub enum NoiseCoefficient<'a> {
    /// `g(t, ŷ, z)` from the drivers, evaluated on the current solution.
    Driver,
    /// `g(t, ŷ', z')` frozen on a previous solution over the same tree.
    Frozen(&'a SolutionTriple),
}

/// Penalized equation at level `n`.
pub fn solve_penalized(
    tree: &ScenarioTree,
    drivers: &DriverPair,
    barrier: &Barrier,
    n: u64,
) -> Result<SolutionTriple> {
    solve_penalized_with(tree, drivers, barrier, n, NoiseCoefficient::Driver)
}

/// Penalized equation at level `n`, explicit in `f` and `g`, implicit in the
/// penalty, with the jump correction `Y_σ = ξ_σ ∨ Y_{σ+}` on nodes where
/// `Δ_+ξ < -1/n`.
pub fn solve_penalized_with(
    tree: &ScenarioTree,
    drivers: &DriverPair,
    barrier: &Barrier,
    n: u64,
    noise: NoiseCoefficient<'_>,
) -> Result<SolutionTriple> {
    if n == 0 {
        return Err(Error::invalid("penalty level must be at least 1"));
    }
    if barrier.steps() != tree.steps() {
        return Err(Error::invalid("barrier and tree have different grids"));
    }
    if let NoiseCoefficient::Frozen(prev) = noise {
        if prev.scenarios.len() != tree.scenarios() {
            return Err(Error::invalid("frozen solution does not match the tree"));
        }
    }
    let dt = tree.dt();
    let c = n as f64 * dt;
    if c > STIFF_PENALTY {
        log::warn!("penalty n·Δt = {c} is stiff");
    }

    let scenarios: Vec<(ScenarioSolution, usize)> = (0..tree.scenarios())
        .into_par_iter()
        .map(|s| {
            let mut active = 0usize;
            let sol = backward(tree, barrier, s, |inp| {
                let gval = match noise {
                    NoiseCoefficient::Driver => drivers.g(inp.t, inp.yhat, inp.z),
                    NoiseCoefficient::Frozen(prev) => {
                        let p = &prev.scenarios[s];
                        drivers.g(inp.t, p.yhat[inp.k][inp.node], p.z_at(inp.k, inp.node))
                    }
                };
                let a = inp.yhat + drivers.f(inp.t, inp.yhat, inp.z) * dt + gval * inp.db;
                if !a.is_finite() {
                    return Err(Error::NonFinite {
                        scenario: s,
                        step: inp.k,
                        node: inp.node,
                    });
                }
                let xi_plus = barrier.right_limit(inp.k, inp.node);
                let y_plus = implicit_penalty_step(a, xi_plus, c);
                let dk_star = c * (xi_plus - y_plus).max(0.0);
                let (y, dk_plus) = if barrier.in_jump_array(inp.k, inp.node, n) {
                    active += 1;
                    let xi = barrier.value(inp.k, inp.node);
                    (xi.max(y_plus), (xi - y_plus).max(0.0))
                } else {
                    (y_plus, 0.0)
                };
                Ok(NodeState {
                    y,
                    y_plus,
                    dk_star,
                    dk_plus,
                })
            })?;
            Ok((sol, active))
        })
        .collect::<Result<_>>()?;

    let active_jump_nodes = scenarios.iter().map(|(_, a)| a).sum();
    Ok(SolutionTriple {
        penalty: Some(n),
        scenarios: scenarios.into_iter().map(|(s, _)| s).collect(),
        active_jump_nodes,
    })
}
