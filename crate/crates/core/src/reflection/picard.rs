use serde::Serialize;

use crate::error::{Error, Result};
use crate::levy::ScenarioTree;
use crate::regulated::Barrier;
use crate::solver::{solve_penalized_with, DriverPair, NoiseCoefficient, SolutionTriple};
use crate::verify::beta_distance;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct PicardStep {
    pub iteration: usize,
    /// `‖(Y_i - Y_{i-1}, Z_i - Z_{i-1})‖_β`.
    pub diff: f64,
    /// `diff_i / diff_{i-1}`; empty on the first iteration.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct PicardResult {
    pub solution: SolutionTriple,
    pub trace: Vec<PicardStep>,
}

impl PicardResult {
    pub fn iterations(&self) -> usize {
        self.trace.len()
    }

    pub fn final_diff(&self) -> f64 {
        self.trace.last().map_or(f64::INFINITY, |s| s.diff)
    }

    /// Largest successive-difference ratio seen while the differences were
    /// still above rounding level.
    pub fn max_ratio(&self) -> Option<f64> {
        self.trace
            .iter()
            .filter(|s| s.diff > 1e-13)
            .filter_map(|s| s.ratio)
            .reduce(f64::max)
    }
}

/// Outer fixed-point loop for a `g` depending on `(y, z)`: each iteration
/// solves the penalized equation at level `n` with `g` frozen on the previous
/// iterate, starting from zero, until successive iterates are within `tol`.
pub fn picard_outer_loop(
    tree: &ScenarioTree,
    drivers: &DriverPair,
    barrier: &Barrier,
    n: u64,
    max_iters: usize,
    tol: f64,
    beta: f64,
) -> Result<PicardResult> {
    if max_iters == 0 || !(tol > 0.0) {
        return Err(Error::invalid("need max_iters ≥ 1 and tol > 0"));
    }
    let mut prev = SolutionTriple::zeros(tree);
    let mut trace: Vec<PicardStep> = Vec::new();
    for iteration in 1..=max_iters {
        let next = solve_penalized_with(tree, drivers, barrier, n, NoiseCoefficient::Frozen(&prev))?;
        let diff = beta_distance(&next, &prev, tree, beta);
        let ratio = trace.last().and_then(|s| (s.diff > 0.0).then(|| diff / s.diff));
        trace.push(PicardStep {
            iteration,
            diff,
            ratio,
        });
        log::debug!("picard iteration {iteration}: diff {diff:e}");
        prev = next;
        if diff < tol {
            return Ok(PicardResult {
                solution: prev,
                trace,
            });
        }
    }
    Err(Error::Divergence {
        iterations: max_iters,
        last_diff: trace.last().map_or(f64::NAN, |s| s.diff),
    })
}
