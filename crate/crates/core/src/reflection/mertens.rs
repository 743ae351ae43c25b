use crate::error::{Error, Result};
use crate::levy::ScenarioTree;

/// Supermartingale tolerance of the decomposition.
pub const MERTENS_TOL: f64 = 1e-10;

/// Mertens decomposition of one scenario's supermartingale on the lattice.
///
/// `M = V + A + K` where `A` is the optional known drift, `K` splits into the
/// right jumps `Δ_+K(t_k) = V(t_k) - V(t_k+)` and the increments of `K*` over
/// `(t_k, t_{k+1}]`. `M` is path dependent on a recombining lattice, so it is
/// stored through its edge increments.
#[derive(Debug, Clone)]
pub struct Mertens {
    pub m0: f64,
    pub dk_plus: Vec<Vec<f64>>,
    pub dk_star: Vec<Vec<f64>>,
    /// `[k][node * outcomes + o]`: `M_{t_{k+1}} - M_{t_k}` along outcome `o`.
    pub dm: Vec<Vec<f64>>,
    outcomes: usize,
}

impl Mertens {
    pub fn martingale_increment(&self, k: usize, node: usize, o: usize) -> f64 {
        self.dm[k][node * self.outcomes + o]
    }

    /// `(M, K)` at every grid time along `nodes` (a lattice path).
    pub fn along(&self, nodes: &[usize], tree: &ScenarioTree) -> (Vec<f64>, Vec<f64>) {
        let mut m = vec![self.m0];
        let mut kk = vec![0.0];
        for k in 0..nodes.len() - 1 {
            let o = (0..tree.n_outcomes())
                .find(|&o| tree.child(k, nodes[k], o) == nodes[k + 1])
                .expect("nodes do not form a lattice path");
            m.push(m[k] + self.martingale_increment(k, nodes[k], o));
            kk.push(kk[k] + self.dk_plus[k][nodes[k]] + self.dk_star[k][nodes[k]]);
        }
        (m, kk)
    }
}

/// Split `V` (values and right limits per `[k][node]`) into martingale and
/// nondecreasing predictable parts. `drift[k][node]` is the known part of the
/// step from `t_k+` to `t_{k+1}` (zero when `None`).
pub fn mertens_decompose(
    tree: &ScenarioTree,
    values: &[Vec<f64>],
    right_limits: &[Vec<f64>],
    drift: Option<&[Vec<f64>]>,
) -> Result<Mertens> {
    let n = tree.steps();
    if values.len() != n + 1 || right_limits.len() != n + 1 {
        return Err(Error::invalid("process does not match the tree"));
    }
    let outcomes = tree.n_outcomes();
    let mut dk_plus = Vec::with_capacity(n);
    let mut dk_star = Vec::with_capacity(n);
    let mut dm = Vec::with_capacity(n);
    for k in 0..n {
        let width = tree.nodes_at(k);
        let (mut dp, mut ds, mut dmk) =
            (Vec::with_capacity(width), Vec::with_capacity(width), Vec::with_capacity(width * outcomes));
        for node in 0..width {
            let mean: f64 = (0..outcomes)
                .map(|o| tree.outcome_prob(o) * values[k + 1][tree.child(k, node, o)])
                .sum();
            let d = drift.map_or(0.0, |d| d[k][node]);
            let jump = values[k][node] - right_limits[k][node];
            let cont = right_limits[k][node] - mean - d;
            if jump < -MERTENS_TOL || cont < -MERTENS_TOL {
                return Err(Error::invalid(format!(
                    "not a supermartingale at step {k}, node {node} \
                     (V - V+ = {jump:e}, V+ - E[V'] = {cont:e})"
                )));
            }
            dp.push(jump);
            ds.push(cont);
            let mut centred = 0.0;
            for o in 0..outcomes {
                let inc = values[k + 1][tree.child(k, node, o)] - mean;
                centred += tree.outcome_prob(o) * inc;
                dmk.push(inc);
            }
            if centred.abs() > MERTENS_TOL {
                return Err(Error::InternalConsistency(format!(
                    "martingale part has conditional mean {centred:e} at step {k}"
                )));
            }
        }
        dk_plus.push(dp);
        dk_star.push(ds);
        dm.push(dmk);
    }
    Ok(Mertens {
        m0: values[0][0],
        dk_plus,
        dk_star,
        dm,
        outcomes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy::{build_tree, teugels_basis, LevyMeasure, TreeOptions, DEFAULT_RANK_TOL};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn tree(n: usize, full: bool) -> ScenarioTree {
        let nu = LevyMeasure::from_pairs(&[(1.0, 1.0), (-0.5, 0.7)]).unwrap();
        let b = teugels_basis(&nu, DEFAULT_RANK_TOL).unwrap();
        let o = TreeOptions::new(1.0, n, 1, 0);
        build_tree(&nu, &b, if full { o.full_tree() } else { o }).unwrap()
    }

    fn node_fn(t: &ScenarioTree, f: impl Fn(usize, usize) -> f64) -> Vec<Vec<f64>> {
        (0..=t.steps()).map(|k| (0..t.nodes_at(k)).map(|i| f(k, i)).collect()).collect()
    }

    #[test]
    fn deterministic_decreasing() {
        let t = tree(10, false);
        let v = node_fn(&t, |k, _| 1.0 - t.time(k));
        let d = mertens_decompose(&t, &v, &v, None).unwrap();
        assert_eq!(d.m0, 1.0);
        for k in 0..10 {
            for i in 0..t.nodes_at(k) {
                assert_eq!(d.dk_plus[k][i], 0.0);
                assert!((d.dk_star[k][i] - 0.1).abs() < 1e-15);
                for o in 0..t.n_outcomes() {
                    assert!(d.martingale_increment(k, i, o).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn right_jump_at_zero() {
        let t = tree(4, false);
        let v = node_fn(&t, |k, _| if k == 0 { 1.0 } else { 0.5 });
        let vp = node_fn(&t, |_, _| 0.5);
        let d = mertens_decompose(&t, &v, &vp, None).unwrap();
        assert_eq!(d.dk_plus[0][0], 0.5);
        assert!(d.dk_star.iter().flatten().all(|&x| x == 0.0));
        let (m, k) = d.along(&[0, 0, 0, 0, 0], &t);
        assert!(m.iter().all(|&x| x == 1.0));
        assert_eq!(k, vec![0.0, 0.5, 0.5, 0.5, 0.5]);
    }

    #[test]
    fn martingale_has_no_k() {
        let t = tree(5, true);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut v = vec![Vec::new(); 6];
        v[5] = (0..t.nodes_at(5)).map(|_| rng.random_range(-1.0..1.0)).collect();
        for k in (0..5).rev() {
            v[k] = (0..t.nodes_at(k))
                .map(|i| {
                    (0..t.n_outcomes())
                        .map(|o| t.outcome_prob(o) * v[k + 1][t.child(k, i, o)])
                        .sum()
                })
                .collect();
        }
        let d = mertens_decompose(&t, &v, &v, None).unwrap();
        assert!(d.dk_plus.iter().flatten().chain(d.dk_star.iter().flatten()).all(|x| x.abs() < 1e-15));
    }

    #[test]
    fn submartingale_is_rejected() {
        let t = tree(3, false);
        let v = node_fn(&t, |k, _| t.time(k));
        assert!(matches!(mertens_decompose(&t, &v, &v, None), Err(Error::InvalidInput(_))));
        let v = node_fn(&t, |_, _| 0.0);
        let vp = node_fn(&t, |_, _| 1e-9);
        assert!(mertens_decompose(&t, &v, &vp, None).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        // build V = M - K from a random martingale and random predictable
        // increments on a full tree, then decompose again
        #[test]
        fn recovers_m_and_k(seed in 0u64..10_000) {
            let t = tree(4, true);
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut m = vec![Vec::new(); 5];
            m[4] = (0..t.nodes_at(4)).map(|_| rng.random_range(-2.0..2.0)).collect();
            for k in (0..4).rev() {
                m[k] = (0..t.nodes_at(k))
                    .map(|i| (0..t.n_outcomes()).map(|o| t.outcome_prob(o) * m[k + 1][t.child(k, i, o)]).sum())
                    .collect();
            }
            let dp: Vec<Vec<f64>> = (0..4).map(|k| (0..t.nodes_at(k)).map(|_| rng.random_range(0.0..0.5)).collect()).collect();
            let ds: Vec<Vec<f64>> = (0..4).map(|k| (0..t.nodes_at(k)).map(|_| rng.random_range(0.0..0.5)).collect()).collect();
            // K at t_k per node; on a full tree nodes carry their history
            let mut kk = vec![vec![0.0]; 5];
            for k in 0..4 {
                let mut next = vec![0.0; t.nodes_at(k + 1)];
                for i in 0..t.nodes_at(k) {
                    for o in 0..t.n_outcomes() {
                        next[t.child(k, i, o)] = kk[k][i] + dp[k][i] + ds[k][i];
                    }
                }
                kk[k + 1] = next;
            }
            let v = node_fn(&t, |k, i| m[k][i] - kk[k][i]);
            let vp = node_fn(&t, |k, i| v[k][i] - if k < 4 { dp[k][i] } else { 0.0 });
            let d = mertens_decompose(&t, &v, &vp, None).unwrap();
            prop_assert!((d.m0 - m[0][0]).abs() < 1e-12);
            for k in 0..4 {
                for i in 0..t.nodes_at(k) {
                    prop_assert!((d.dk_plus[k][i] - dp[k][i]).abs() < 1e-12);
                    prop_assert!((d.dk_star[k][i] - ds[k][i]).abs() < 1e-12);
                    for o in 0..t.n_outcomes() {
                        let want = m[k + 1][t.child(k, i, o)] - m[k][i];
                        prop_assert!((d.martingale_increment(k, i, o) - want).abs() < 1e-12);
                    }
                }
            }
        }
    }
}
