//! Scenario model for the doubly stochastic information structure.
//!
//! Each scenario fixes a whole Brownian path up front; the jump noise is
//! represented exactly as a lattice where every step branches into
//! `{no jump} ∪ {jump x_j}` with probabilities `(1 - λΔt, λ_1Δt, …)`.
//! The recombining lattice keys nodes by the vector of jump counts per atom,
//! the full tree keeps one node per outcome sequence.

use std::collections::HashMap;

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};

use super::basis::{teugels_increment, Outcome, TeugelsBasis};
use super::measure::LevyMeasure;
use crate::error::{Error, Result};
use crate::rng::{self, Domain};

const MAX_NODES: usize = 5_000_000;

#[derive(Debug, Clone, Copy)]
pub struct TreeOptions {
    pub horizon: f64,
    pub steps: usize,
    pub scenarios: usize,
    pub seed: u64,
    pub recombining: bool,
}

impl TreeOptions {
    pub fn new(horizon: f64, steps: usize, scenarios: usize, seed: u64) -> Self {
        Self {
            horizon,
            steps,
            scenarios,
            seed,
            recombining: true,
        }
    }

    pub fn full_tree(mut self) -> Self {
        self.recombining = false;
        self
    }
}

#[derive(Debug, Clone)]
struct Level {
    counts: Vec<Vec<u32>>,
    /// `children[node * n_outcomes + outcome]`; empty on the last level.
    children: Vec<usize>,
    reach: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ScenarioTree {
    horizon: f64,
    dt: f64,
    grid: Vec<f64>,
    jump_sizes: Vec<f64>,
    outcome_probs: Vec<f64>,
    increments: Vec<Vec<f64>>,
    gram: Vec<Vec<f64>>,
    gram_inv: Vec<Vec<f64>>,
    brownian: Vec<Vec<f64>>,
    levels: Vec<Level>,
    recombining: bool,
}

impl ScenarioTree {
    pub fn steps(&self) -> usize {
        self.grid.len() - 1
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn time(&self, k: usize) -> f64 {
        self.grid[k]
    }

    pub fn is_recombining(&self) -> bool {
        self.recombining
    }

    pub fn scenarios(&self) -> usize {
        self.brownian.len()
    }

    /// Dimension of the Teugels basis (number of martingale coordinates).
    pub fn dim(&self) -> usize {
        self.gram.len()
    }

    pub fn n_outcomes(&self) -> usize {
        self.outcome_probs.len()
    }

    pub fn outcome(&self, o: usize) -> Outcome {
        if o == 0 {
            Outcome::None
        } else {
            Outcome::Jump(self.jump_sizes[o - 1])
        }
    }

    pub fn outcome_probs(&self) -> &[f64] {
        &self.outcome_probs
    }

    pub fn outcome_prob(&self, o: usize) -> f64 {
        self.outcome_probs[o]
    }

    /// `ΔH^(1..m)` for outcome `o`.
    pub fn increment(&self, o: usize) -> &[f64] {
        &self.increments[o]
    }

    /// One-step Gram matrix `Σ_o P(o) ΔH(o) ΔH(o)^T`.
    pub fn gram(&self) -> &[Vec<f64>] {
        &self.gram
    }

    pub fn gram_inv(&self) -> &[Vec<f64>] {
        &self.gram_inv
    }

    pub fn nodes_at(&self, k: usize) -> usize {
        self.levels[k].counts.len()
    }

    pub fn child(&self, k: usize, node: usize, o: usize) -> usize {
        self.levels[k].children[node * self.n_outcomes() + o]
    }

    /// Jump counts per atom accumulated up to the node.
    pub fn counts(&self, k: usize, node: usize) -> &[u32] {
        &self.levels[k].counts[node]
    }

    /// Uncompensated value `L_{t_k}` of the jump process at the node.
    pub fn levy_value(&self, k: usize, node: usize) -> f64 {
        self.counts(k, node)
            .iter()
            .zip(&self.jump_sizes)
            .map(|(&c, x)| c as f64 * x)
            .sum()
    }

    /// Probability of reaching the node from the root.
    pub fn reach_prob(&self, k: usize, node: usize) -> f64 {
        self.levels[k].reach[node]
    }

    /// Brownian increment `B_{t_{k+1}} - B_{t_k}` of a scenario.
    pub fn db(&self, scenario: usize, k: usize) -> f64 {
        self.brownian[scenario][k]
    }

    pub fn brownian_increments(&self, scenario: usize) -> &[f64] {
        &self.brownian[scenario]
    }

    /// Same lattice with scenarios reordered: new scenario `i` is old scenario `order[i]`.
    pub fn with_scenario_order(&self, order: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.scenarios()];
        for &i in order {
            if i >= seen.len() || std::mem::replace(&mut seen[i], true) {
                return Err(Error::invalid("scenario order is not a permutation"));
            }
        }
        if order.len() != self.scenarios() {
            return Err(Error::invalid("scenario order is not a permutation"));
        }
        let mut out = self.clone();
        out.brownian = order.iter().map(|&i| self.brownian[i].clone()).collect();
        Ok(out)
    }
}

pub fn build_tree(
    measure: &LevyMeasure,
    basis: &TeugelsBasis,
    opts: TreeOptions,
) -> Result<ScenarioTree> {
    if !(opts.horizon > 0.0) || !opts.horizon.is_finite() {
        return Err(Error::invalid(format!(
            "horizon must be positive, got {}",
            opts.horizon
        )));
    }
    if opts.steps == 0 {
        return Err(Error::invalid("number of steps must be at least 1"));
    }
    if opts.scenarios == 0 {
        return Err(Error::invalid("number of scenarios must be at least 1"));
    }
    let n = opts.steps;
    let dt = opts.horizon / n as f64;
    let lambda = measure.total_intensity();
    if lambda * dt >= 1.0 {
        return Err(Error::StepSize(format!(
            "jump probability per step λΔt = {} must be below 1; increase the number of steps N above {}",
            lambda * dt,
            (lambda * opts.horizon).floor() as usize
        )));
    }

    let jump_sizes: Vec<f64> = measure.atoms().iter().map(|a| a.x).collect();
    let mut outcome_probs = vec![1.0 - lambda * dt];
    outcome_probs.extend(measure.atoms().iter().map(|a| a.lambda * dt));

    let mut increments = vec![teugels_increment(basis, Outcome::None, dt)];
    increments.extend(
        jump_sizes
            .iter()
            .map(|&x| teugels_increment(basis, Outcome::Jump(x), dt)),
    );

    let m = basis.dim();
    let gram_mat = DMatrix::from_fn(m, m, |a, b| {
        outcome_probs
            .iter()
            .zip(&increments)
            .map(|(p, h)| p * h[a] * h[b])
            .sum::<f64>()
    });
    let gram_inv_mat = gram_mat
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NumericalDegeneracy("one-step Gram matrix is singular".into()))?
        .inverse();
    let to_rows = |mat: &DMatrix<f64>| -> Vec<Vec<f64>> {
        (0..m).map(|a| (0..m).map(|b| mat[(a, b)]).collect()).collect()
    };

    let levels = if opts.recombining {
        recombining_levels(&outcome_probs, jump_sizes.len(), n)?
    } else {
        full_levels(&outcome_probs, jump_sizes.len(), n)?
    };

    let brownian = (0..opts.scenarios)
        .map(|s| {
            let mut rng = rng::stream(opts.seed, Domain::Brownian, s as u64);
            let sd = dt.sqrt();
            (0..n)
                .map(|_| {
                    let g: f64 = StandardNormal.sample(&mut rng);
                    g * sd
                })
                .collect()
        })
        .collect();

    Ok(ScenarioTree {
        horizon: opts.horizon,
        dt,
        grid: (0..=n).map(|k| k as f64 * dt).collect(),
        jump_sizes,
        outcome_probs,
        increments,
        gram: to_rows(&gram_mat),
        gram_inv: to_rows(&gram_inv_mat),
        brownian,
        levels,
        recombining: opts.recombining,
    })
}

fn recombining_levels(probs: &[f64], atoms: usize, steps: usize) -> Result<Vec<Level>> {
    let outcomes = probs.len();
    let mut levels = vec![Level {
        counts: vec![vec![0; atoms]],
        children: Vec::new(),
        reach: vec![1.0],
    }];
    let mut total = 1usize;
    for _ in 0..steps {
        let cur = levels.last_mut().unwrap();
        let mut index: HashMap<Vec<u32>, usize> = HashMap::new();
        let mut next_counts: Vec<Vec<u32>> = Vec::new();
        let mut next_reach: Vec<f64> = Vec::new();
        let mut children = Vec::with_capacity(cur.counts.len() * outcomes);
        for (node, c) in cur.counts.iter().enumerate() {
            for (o, p) in probs.iter().enumerate() {
                let mut nc = c.clone();
                if o > 0 {
                    nc[o - 1] += 1;
                }
                let idx = *index.entry(nc.clone()).or_insert_with(|| {
                    next_counts.push(nc);
                    next_reach.push(0.0);
                    next_counts.len() - 1
                });
                next_reach[idx] += cur.reach[node] * p;
                children.push(idx);
            }
        }
        cur.children = children;
        total += next_counts.len();
        if total > MAX_NODES {
            return Err(Error::invalid(format!("lattice exceeds {MAX_NODES} nodes")));
        }
        levels.push(Level {
            counts: next_counts,
            children: Vec::new(),
            reach: next_reach,
        });
    }
    Ok(levels)
}

fn full_levels(probs: &[f64], atoms: usize, steps: usize) -> Result<Vec<Level>> {
    let outcomes = probs.len();
    let leaves = (outcomes as f64).powi(steps as i32);
    if leaves > MAX_NODES as f64 {
        return Err(Error::invalid(format!(
            "full tree with {outcomes}^{steps} leaves exceeds {MAX_NODES} nodes; use the recombining lattice"
        )));
    }
    let mut levels = vec![Level {
        counts: vec![vec![0; atoms]],
        children: Vec::new(),
        reach: vec![1.0],
    }];
    for _ in 0..steps {
        let cur = levels.last_mut().unwrap();
        let width = cur.counts.len();
        let mut counts = Vec::with_capacity(width * outcomes);
        let mut reach = Vec::with_capacity(width * outcomes);
        for (node, c) in cur.counts.iter().enumerate() {
            for (o, p) in probs.iter().enumerate() {
                let mut nc = c.clone();
                if o > 0 {
                    nc[o - 1] += 1;
                }
                counts.push(nc);
                reach.push(cur.reach[node] * p);
            }
        }
        cur.children = (0..width * outcomes).collect();
        levels.push(Level {
            counts,
            children: Vec::new(),
            reach,
        });
    }
    Ok(levels)
}
