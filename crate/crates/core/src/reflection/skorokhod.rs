use crate::levy::ScenarioTree;
use crate::regulated::Barrier;
use crate::solver::SolutionTriple;

/// Discrete minimality residual of `K`:
///
/// `E Σ_k |Y(t_k+) - ξ(t_k+)|·ΔK*_k + |Y(t_k) - ξ(t_k)|·Δ_+K_k`.
///
/// `Y(t_k+)` is the value carried on `(t_k, t_{k+1})` and `ξ(t_k+)` is the
/// left-upper-semicontinuous envelope there, so the first sum is the discrete
/// `∫(Y_- - ξ̂) dK*`. Terms are taken in absolute value so that a penalized
/// solution sitting below the barrier is not rewarded.
pub fn skorokhod_residual(sol: &SolutionTriple, barrier: &Barrier, tree: &ScenarioTree) -> f64 {
    let n = tree.steps();
    let p = sol.scenarios.len() as f64;
    let mut total = 0.0;
    for s in &sol.scenarios {
        for k in 0..n {
            for i in 0..tree.nodes_at(k) {
                let cont = (s.y_plus[k][i] - barrier.right_limit(k, i)).abs() * s.dk_star[k][i];
                let jump = (s.y[k][i] - barrier.value(k, i)).abs() * s.dk_plus[k][i];
                total += tree.reach_prob(k, i) * (cont + jump);
            }
        }
    }
    total / p
}
