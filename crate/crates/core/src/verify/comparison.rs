use serde::Serialize;

use super::gamma::{doleans_gamma, GammaValue};
use crate::error::{Error, Result};
use crate::levy::ScenarioTree;
use crate::regulated::Barrier;
use crate::solver::{solve_penalized, DriverPair, SolutionTriple};

/// Tolerance on `Y¹ ≤ Y²`.
pub const COMPARISON_TOL: f64 = 1e-12;

/// Linearization of the difference of two discrete solutions at one node.
///
/// With `δ = Y¹ - Y²` the explicit step gives exactly
/// `δa = Σ_o P(o) δY_{k+1}(o) · factor(o) + u Δt`, where
/// `factor(o) = 1 + p Δt + q ΔB + w·ΔH(o)` and `w = G⁻¹(ζ Δt + η ΔB)`.
/// `(q, η)` are the analogues of `(p, ζ)` for `g`; they vanish when `g` does
/// not depend on the solution.
#[derive(Debug, Clone, Serialize)]
pub struct NodeLinearization {
    pub p: f64,
    pub zeta: Vec<f64>,
    pub q: f64,
    pub eta: Vec<f64>,
    pub u: f64,
    /// Effective per-coordinate coefficient on `ΔH`.
    pub w: Vec<f64>,
    pub min_factor: f64,
}

/// Two solutions on one tree with ordered data, plus the per-node
/// linearization `[scenario][k][node]`.
#[derive(Debug, Clone)]
pub struct ComparisonInstance {
    pub lower: SolutionTriple,
    pub upper: SolutionTriple,
    pub nodes: Vec<Vec<Vec<NodeLinearization>>>,
    pub drivers_ordered: bool,
    pub barriers_ordered: bool,
    /// Nodes where only the lower problem applies a right-jump correction.
    pub unmatched_jump_nodes: usize,
    lipschitz_f: f64,
    dt: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NodeRef {
    pub scenario: usize,
    pub k: usize,
    pub node: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonReport {
    pub holds: bool,
    /// Largest `Y¹ - Y²` over values and right limits, and where it occurs.
    pub max_gap: f64,
    pub worst: NodeRef,
    /// Every step factor is positive.
    pub gamma_positive: bool,
    pub min_factor: f64,
    pub positivity_failures: usize,
    pub max_abs_p: f64,
    /// Largest single `z` quotient; each is bounded by `L` under the chain.
    pub max_abs_zeta: f64,
    pub max_u: f64,
    pub preconditions_ok: bool,
    /// `ok`, `positivity_failed`, `precondition_failed` or `unexplained`.
    pub classification: String,
}

/// `num / den`, or 0 for `den = 0`. A quotient that exceeds `bound` by no
/// more than the rounding noise of `num` is pulled back onto the bound, so
/// near-equal arguments cannot produce spurious large coefficients. The
/// identity it feeds stays exact up to that same rounding.
fn quotient(num: f64, den: f64, bound: f64, scale: f64) -> f64 {
    if den == 0.0 {
        return 0.0;
    }
    let q = num / den;
    let noise = 16.0 * f64::EPSILON * scale / den.abs();
    if q.abs() > bound && q.abs() - bound <= noise {
        bound.copysign(q)
    } else {
        q
    }
}

/// `(F(y¹,z¹) - F(y²,z²))` split into a `y` quotient and per-coordinate `z`
/// quotients along the chain that swaps coordinates of `z¹` for those of
/// `z²` one at a time. `(by, bz)` bound the respective quotients.
fn finite_differences<F: Fn(f64, &[f64]) -> f64>(
    eval: F,
    (y1, z1): (f64, &[f64]),
    (y2, z2): (f64, &[f64]),
    (by, bz): (f64, f64),
) -> (f64, Vec<f64>) {
    let (a, b) = (eval(y1, z1), eval(y2, z1));
    let p = quotient(a - b, y1 - y2, by, a.abs() + b.abs());
    let mut chain = z1.to_vec();
    let mut zeta = Vec::with_capacity(z1.len());
    for j in 0..z1.len() {
        let before = eval(y2, &chain);
        chain[j] = z2[j];
        let after = eval(y2, &chain);
        zeta.push(quotient(before - after, z1[j] - z2[j], bz, before.abs() + after.abs()));
    }
    (p, zeta)
}

impl ComparisonInstance {
    /// Solve both problems at penalty level `n` and linearize.
    pub fn solve(
        tree: &ScenarioTree,
        lower: (&DriverPair, &Barrier),
        upper: (&DriverPair, &Barrier),
        n: u64,
    ) -> Result<Self> {
        let s1 = solve_penalized(tree, lower.0, lower.1, n)?;
        let s2 = solve_penalized(tree, upper.0, upper.1, n)?;
        Self::from_solutions(tree, lower, upper, s1, s2, n)
    }

    pub fn from_solutions(
        tree: &ScenarioTree,
        lower: (&DriverPair, &Barrier),
        upper: (&DriverPair, &Barrier),
        sol1: SolutionTriple,
        sol2: SolutionTriple,
        n: u64,
    ) -> Result<Self> {
        let (d1, b1) = lower;
        let (d2, b2) = upper;
        if d1.g_spec() != d2.g_spec() {
            return Err(Error::invalid("comparison needs the same g in both problems"));
        }
        if sol1.scenarios.len() != tree.scenarios() || sol2.scenarios.len() != tree.scenarios() {
            return Err(Error::invalid("solutions do not match the tree"));
        }
        let dt = tree.dt();
        let steps = tree.steps();
        let ginv = tree.gram_inv();
        let m = tree.dim();

        let mut barriers_ordered = true;
        let mut unmatched_jump_nodes = 0;
        for k in 0..=steps {
            for i in 0..tree.nodes_at(k) {
                barriers_ordered &= b1.value(k, i) <= b2.value(k, i)
                    && b1.right_limit(k, i) <= b2.right_limit(k, i);
                if k < steps && b1.in_jump_array(k, i, n) && !b2.in_jump_array(k, i, n) {
                    unmatched_jump_nodes += 1;
                }
            }
        }
        let mut drivers_ordered = probe_ordered(d1, d2, m);
        let f_bounds = (d1.lipschitz_f(), d1.lipschitz_f());
        let g_bounds = (d1.lipschitz_g().sqrt(), d1.alpha_g().sqrt());

        let mut nodes = Vec::with_capacity(tree.scenarios());
        for (s, (a, b)) in sol1.scenarios.iter().zip(&sol2.scenarios).enumerate() {
            let mut per_k = Vec::with_capacity(steps);
            for k in 0..steps {
                let t = tree.time(k);
                let db = tree.db(s, k);
                let mut row = Vec::with_capacity(tree.nodes_at(k));
                for i in 0..tree.nodes_at(k) {
                    let (y1, z1) = (a.yhat[k][i], a.z_at(k, i));
                    let (y2, z2) = (b.yhat[k][i], b.z_at(k, i));
                    let (p, zeta) = finite_differences(|y, z| d1.f(t, y, z), (y1, z1), (y2, z2), f_bounds);
                    let (q, eta) = finite_differences(|y, z| d1.g(t, y, z), (y1, z1), (y2, z2), g_bounds);
                    let u = d1.f(t, y2, z2) - d2.f(t, y2, z2);
                    drivers_ordered &= u <= 0.0;
                    let w: Vec<f64> = (0..m)
                        .map(|r| (0..m).map(|c| ginv[r][c] * (zeta[c] * dt + eta[c] * db)).sum())
                        .collect();
                    let min_factor = (0..tree.n_outcomes())
                        .map(|o| {
                            let dh = tree.increment(o);
                            1.0 + p * dt + q * db + w.iter().zip(dh).map(|(x, h)| x * h).sum::<f64>()
                        })
                        .fold(f64::INFINITY, f64::min);
                    row.push(NodeLinearization {
                        p,
                        zeta,
                        q,
                        eta,
                        u,
                        w,
                        min_factor,
                    });
                }
                per_k.push(row);
            }
            nodes.push(per_k);
        }
        Ok(Self {
            lower: sol1,
            upper: sol2,
            nodes,
            drivers_ordered,
            barriers_ordered,
            unmatched_jump_nodes,
            lipschitz_f: d1.lipschitz_f(),
            dt,
        })
    }

    /// `Γ` from time 0 along a lattice path of one scenario, using the
    /// effective coefficients (`p + q ΔB/Δt`, `w`).
    pub fn gamma_along(&self, tree: &ScenarioTree, scenario: usize, outcomes: &[usize]) -> Result<GammaValue> {
        let mut node = 0;
        let mut p = Vec::new();
        let mut zeta = Vec::new();
        let mut dh = Vec::new();
        for (k, &o) in outcomes.iter().enumerate() {
            let lin = &self.nodes[scenario][k][node];
            p.push(lin.p + lin.q * tree.db(scenario, k) / self.dt);
            zeta.push(lin.w.clone());
            dh.push(tree.increment(o).to_vec());
            node = tree.child(k, node, o);
        }
        doleans_gamma(&p, &zeta, &dh, self.dt, 0, outcomes.len())
    }
}

/// `f¹ ≤ f²` on a fixed probe grid.
fn probe_ordered(d1: &DriverPair, d2: &DriverPair, m: usize) -> bool {
    let grid = [-3.0, -1.0, -0.2, 0.0, 0.4, 1.5, 4.0];
    for &t in &[0.0, 0.5, 1.0] {
        for &y in &grid {
            for &zv in &grid {
                let z = vec![zv; m.max(1)];
                if d1.f(t, y, &z) > d2.f(t, y, &z) {
                    return false;
                }
            }
        }
    }
    true
}

pub fn comparison_check(inst: &ComparisonInstance) -> ComparisonReport {
    let mut max_gap = f64::NEG_INFINITY;
    let mut worst = NodeRef {
        scenario: 0,
        k: 0,
        node: 0,
    };
    for (s, (a, b)) in inst.lower.scenarios.iter().zip(&inst.upper.scenarios).enumerate() {
        for k in 0..a.y.len() {
            for i in 0..a.y[k].len() {
                let gap = (a.y[k][i] - b.y[k][i]).max(a.y_plus[k][i] - b.y_plus[k][i]);
                if gap > max_gap {
                    max_gap = gap;
                    worst = NodeRef {
                        scenario: s,
                        k,
                        node: i,
                    };
                }
            }
        }
    }
    let lin = inst.nodes.iter().flatten().flatten();
    let min_factor = lin.clone().map(|l| l.min_factor).fold(f64::INFINITY, f64::min);
    let positivity_failures = lin.clone().filter(|l| l.min_factor <= 0.0).count();
    let max_abs_p = lin.clone().map(|l| l.p.abs()).fold(0.0, f64::max);
    let max_abs_zeta = lin
        .clone()
        .flat_map(|l| l.zeta.iter().map(|v| v.abs()))
        .fold(0.0, f64::max);
    let max_u = lin.map(|l| l.u).fold(f64::NEG_INFINITY, f64::max);

    let slack = inst.lipschitz_f * (1.0 + 1e-9) + 1e-12;
    let preconditions_ok = inst.drivers_ordered
        && inst.barriers_ordered
        && inst.unmatched_jump_nodes == 0
        && max_abs_p <= slack
        && max_abs_zeta <= slack;
    let holds = max_gap <= COMPARISON_TOL;
    let gamma_positive = positivity_failures == 0;
    let classification = if holds {
        "ok"
    } else if !preconditions_ok {
        "precondition_failed"
    } else if !gamma_positive {
        "positivity_failed"
    } else {
        "unexplained"
    };
    ComparisonReport {
        holds,
        max_gap,
        worst,
        gamma_positive,
        min_factor,
        positivity_failures,
        max_abs_p,
        max_abs_zeta,
        max_u,
        preconditions_ok,
        classification: classification.to_string(),
    }
}
