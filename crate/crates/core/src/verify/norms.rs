use serde::Serialize;

use crate::error::{Error, Result};
use crate::levy::ScenarioTree;
use crate::regulated::Barrier;
use crate::solver::{DriverPair, SolutionTriple};

/// Exponentially weighted norms of a solution and of its data.
///
/// `sup_y` is `max_k E[e^{β t_k} max(|Y_{t_k}|², |Y_{t_k+}|²)]`, the supremum
/// over deterministic grid times; the integral terms are left Riemann sums.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BetaNorms {
    pub beta: f64,
    pub sup_y: f64,
    pub int_y: f64,
    pub int_z: f64,
    /// `E|K_T|²`.
    pub k_sq: f64,
    pub data_barrier: f64,
    pub data_f: f64,
    pub data_g: f64,
}

impl BetaNorms {
    pub fn norm_y(&self) -> f64 {
        (self.sup_y + self.int_y).sqrt()
    }

    pub fn norm_z(&self) -> f64 {
        self.int_z.sqrt()
    }

    pub fn norm_k(&self) -> f64 {
        self.k_sq.sqrt()
    }

    pub fn solution_norm(&self) -> f64 {
        (self.sup_y + self.int_y + self.int_z + self.k_sq).sqrt()
    }

    pub fn data_norm(&self) -> f64 {
        (self.data_barrier + self.data_f + self.data_g).sqrt()
    }
}

pub fn beta_norms(
    sol: &SolutionTriple,
    barrier: &Barrier,
    drivers: &DriverPair,
    tree: &ScenarioTree,
    beta: f64,
) -> Result<BetaNorms> {
    if !(beta > 0.0) {
        return Err(Error::invalid(format!("beta must be positive, got {beta}")));
    }
    let n = tree.steps();
    let dt = tree.dt();
    let w = |k: usize| (beta * tree.time(k)).exp();

    let sup_y = sol
        .expected(tree, n + 1, |s, k, i| s.y[k][i].powi(2).max(s.y_plus[k][i].powi(2)))
        .into_iter()
        .enumerate()
        .map(|(k, v)| w(k) * v)
        .fold(0.0, f64::max);
    let int_y: f64 = sol
        .expected(tree, n, |s, k, i| s.y_plus[k][i].powi(2))
        .into_iter()
        .enumerate()
        .map(|(k, v)| w(k) * v * dt)
        .sum();
    let int_z: f64 = sol
        .expected(tree, n, |s, k, i| s.z_at(k, i).iter().map(|v| v * v).sum())
        .into_iter()
        .enumerate()
        .map(|(k, v)| w(k) * v * dt)
        .sum();
    let k_sq = terminal_k_second_moment(sol, tree);

    let data_barrier = (0..=n)
        .map(|k| {
            let e: f64 = (0..tree.nodes_at(k))
                .map(|i| {
                    tree.reach_prob(k, i)
                        * barrier
                            .value(k, i)
                            .powi(2)
                            .max(barrier.right_limit(k, i).powi(2))
                })
                .sum();
            w(k) * e
        })
        .fold(0.0, f64::max);
    let zero = vec![0.0; tree.dim()];
    let data_f = (0..n)
        .map(|k| w(k) * drivers.f(tree.time(k), 0.0, &zero).powi(2) * dt)
        .sum();
    let data_g = (0..n)
        .map(|k| w(k) * drivers.g(tree.time(k), 0.0, &zero).powi(2) * dt)
        .sum();

    Ok(BetaNorms {
        beta,
        sup_y,
        int_y,
        int_z,
        k_sq,
        data_barrier,
        data_f,
        data_g,
    })
}

/// `E|K_T|²` by pushing the first two conditional moments of `K` forward
/// through the lattice; exact on recombining lattices where `K` is
/// path dependent.
fn terminal_k_second_moment(sol: &SolutionTriple, tree: &ScenarioTree) -> f64 {
    let n = tree.steps();
    let mut total = 0.0;
    for s in &sol.scenarios {
        // (mass, E[K 1_node], E[K² 1_node])
        let mut cur = vec![(1.0, 0.0, 0.0)];
        for k in 0..n {
            let mut next = vec![(0.0, 0.0, 0.0); tree.nodes_at(k + 1)];
            for (node, &(mass, s1, s2)) in cur.iter().enumerate() {
                let inc = s.dk_star[k][node] + s.dk_plus[k][node];
                let m1 = s1 + mass * inc;
                let m2 = s2 + 2.0 * inc * s1 + mass * inc * inc;
                for o in 0..tree.n_outcomes() {
                    let p = tree.outcome_prob(o);
                    let c = &mut next[tree.child(k, node, o)];
                    c.0 += p * mass;
                    c.1 += p * m1;
                    c.2 += p * m2;
                }
            }
            cur = next;
        }
        total += cur.iter().map(|c| c.2).sum::<f64>();
    }
    total / sol.scenarios.len() as f64
}

/// `‖(Y - Y', Z - Z')‖_β` with the sup term over grid times.
pub fn beta_distance(a: &SolutionTriple, b: &SolutionTriple, tree: &ScenarioTree, beta: f64) -> f64 {
    let n = tree.steps();
    let dt = tree.dt();
    let p = a.scenarios.len() as f64;
    let w = |k: usize| (beta * tree.time(k)).exp();
    let mut sup: f64 = 0.0;
    let mut int_z = 0.0;
    for k in 0..=n {
        let mut ey = 0.0;
        let mut ez = 0.0;
        for (sa, sb) in a.scenarios.iter().zip(&b.scenarios) {
            for i in 0..tree.nodes_at(k) {
                let r = tree.reach_prob(k, i);
                let dy = (sa.y[k][i] - sb.y[k][i]).abs().max((sa.y_plus[k][i] - sb.y_plus[k][i]).abs());
                ey += r * dy * dy;
                if k < n {
                    ez += r * sa
                        .z_at(k, i)
                        .iter()
                        .zip(sb.z_at(k, i))
                        .map(|(u, v)| (u - v).powi(2))
                        .sum::<f64>();
                }
            }
        }
        sup = sup.max(w(k) * ey / p);
        if k < n {
            int_z += w(k) * ez / p * dt;
        }
    }
    (sup + int_z).sqrt()
}
