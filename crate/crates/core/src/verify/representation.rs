use crate::error::{Error, Result};
use crate::levy::ScenarioTree;
use crate::solver::project_z;

/// `M_T = E[M_T] + Σ_k Z_k·ΔH_k` recovered node by node.
#[derive(Debug, Clone)]
pub struct Representation {
    pub mean: f64,
    /// `[k][node * m + i]`.
    pub z: Vec<Vec<f64>>,
    pub max_residual: f64,
}

/// Backward projection of a terminal value (one entry per leaf) onto
/// `span{1, ΔH^(1..m)}` at every node.
pub fn martingale_representation(terminal: &[f64], tree: &ScenarioTree) -> Result<Representation> {
    let n = tree.steps();
    if terminal.len() != tree.nodes_at(n) {
        return Err(Error::invalid(format!(
            "expected {} terminal values, got {}",
            tree.nodes_at(n),
            terminal.len()
        )));
    }
    let mut level = terminal.to_vec();
    let mut z = vec![Vec::new(); n];
    let mut max_residual: f64 = 0.0;
    let mut next = vec![0.0; tree.n_outcomes()];
    for k in (0..n).rev() {
        let mut vals = Vec::with_capacity(tree.nodes_at(k));
        let mut zk = Vec::with_capacity(tree.nodes_at(k) * tree.dim());
        for node in 0..tree.nodes_at(k) {
            for (o, v) in next.iter_mut().enumerate() {
                *v = level[tree.child(k, node, o)];
            }
            let p = project_z(tree, &next)?;
            max_residual = max_residual.max(p.residual);
            vals.push(p.yhat);
            zk.extend_from_slice(&p.z);
        }
        z[k] = zk;
        level = vals;
    }
    Ok(Representation {
        mean: level[0],
        z,
        max_residual,
    })
}

/// Largest projection residual of the representation of `terminal`.
pub fn representation_residual(terminal: &[f64], tree: &ScenarioTree) -> Result<f64> {
    martingale_representation(terminal, tree).map(|r| r.max_residual)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy::{build_tree, teugels_basis, LevyMeasure, TreeOptions, DEFAULT_RANK_TOL};
    use rand::{Rng, SeedableRng};

    fn full(atoms: &[(f64, f64)], n: usize) -> ScenarioTree {
        let nu = LevyMeasure::from_pairs(atoms).unwrap();
        let b = teugels_basis(&nu, DEFAULT_RANK_TOL).unwrap();
        build_tree(&nu, &b, TreeOptions::new(1.0, n, 1, 0).full_tree()).unwrap()
    }

    #[test]
    fn constant_terminal() {
        let t = full(&[(1.0, 1.0)], 4);
        let r = martingale_representation(&vec![2.5; t.nodes_at(4)], &t).unwrap();
        assert!((r.mean - 2.5).abs() < 1e-15);
        assert!(r.z.iter().flatten().all(|z| z.abs() < 1e-14));
        assert_eq!(r.max_residual, 0.0);
    }

    #[test]
    fn last_increment_terminal() {
        let t = full(&[(1.0, 1.0)], 3);
        let leaves: Vec<f64> = (0..t.nodes_at(3)).map(|i| t.increment(i % t.n_outcomes())[0]).collect();
        let r = martingale_representation(&leaves, &t).unwrap();
        assert!(r.mean.abs() < 1e-15);
        assert!(r.z[2].iter().all(|z| (z - 1.0).abs() < 1e-12));
        assert!(r.z[0].iter().chain(&r.z[1]).all(|z| z.abs() < 1e-12));
    }

    #[test]
    fn arbitrary_terminal_is_reconstructed() {
        let t = full(&[(1.0, 1.0), (-0.5, 2.0)], 4);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let leaves: Vec<f64> = (0..t.nodes_at(4)).map(|_| rng.random_range(-3.0..3.0)).collect();
        let r = martingale_representation(&leaves, &t).unwrap();
        assert!(r.max_residual <= 1e-12);
        // rebuild every leaf from the mean and the integrands
        let m = t.dim();
        let mut vals = vec![r.mean];
        for k in 0..4 {
            let mut next = vec![0.0; t.nodes_at(k + 1)];
            for (node, v) in vals.iter().enumerate() {
                for o in 0..t.n_outcomes() {
                    let dh = t.increment(o);
                    let z = &r.z[k][node * m..(node + 1) * m];
                    next[t.child(k, node, o)] = v + z.iter().zip(dh).map(|(a, b)| a * b).sum::<f64>();
                }
            }
            vals = next;
        }
        for (a, b) in vals.iter().zip(&leaves) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(representation_residual(&leaves[1..], &t).is_err());
    }
}
