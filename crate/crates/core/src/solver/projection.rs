use crate::error::{Error, Result};
use crate::levy::ScenarioTree;

/// Conditional mean and martingale coefficients of a one-step random variable.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub yhat: f64,
    pub z: Vec<f64>,
    /// `max_o |v(o) - ŷ - z·ΔH(o)|`.
    pub residual: f64,
}

/// Weighted least-squares projection of `next_values` onto `span{1, ΔH^(1..m)}`.
///
/// `ŷ = Σ_o P(o) v(o)` and `z = G⁻¹ Σ_o P(o) ΔH(o) (v(o) - ŷ)` with the exact
/// one-step Gram matrix `G`. Since the increments are centered the two parts
/// decouple. With one basis element per atom the span covers every outcome,
/// so the residual is zero up to rounding.
pub fn project_z(tree: &ScenarioTree, next_values: &[f64]) -> Result<Projection> {
    let outcomes = tree.n_outcomes();
    if next_values.len() != outcomes {
        return Err(Error::invalid(format!(
            "expected {outcomes} outcome values, got {}",
            next_values.len()
        )));
    }
    let m = tree.dim();
    let yhat: f64 = tree
        .outcome_probs()
        .iter()
        .zip(next_values)
        .map(|(p, v)| p * v)
        .sum();
    let mut rhs = vec![0.0; m];
    for (o, v) in next_values.iter().enumerate() {
        let w = tree.outcome_prob(o) * (v - yhat);
        for (r, h) in rhs.iter_mut().zip(tree.increment(o)) {
            *r += w * h;
        }
    }
    let z: Vec<f64> = tree
        .gram_inv()
        .iter()
        .map(|row| row.iter().zip(&rhs).map(|(a, b)| a * b).sum())
        .collect();
    let residual = next_values
        .iter()
        .enumerate()
        .map(|(o, v)| {
            let fit: f64 = z.iter().zip(tree.increment(o)).map(|(a, b)| a * b).sum();
            (v - yhat - fit).abs()
        })
        .fold(0.0, f64::max);
    if !yhat.is_finite() || z.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalDegeneracy(
            "projection produced non-finite coefficients".into(),
        ));
    }
    Ok(Projection { yhat, z, residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy::{build_tree, teugels_basis, LevyMeasure, TreeOptions, DEFAULT_RANK_TOL};

    fn tree(pairs: &[(f64, f64)], n: usize) -> ScenarioTree {
        let nu = LevyMeasure::from_pairs(pairs).unwrap();
        let b = teugels_basis(&nu, DEFAULT_RANK_TOL).unwrap();
        build_tree(&nu, &b, TreeOptions::new(1.0, n, 1, 0)).unwrap()
    }

    #[test]
    fn constant_values() {
        let t = tree(&[(1.0, 1.0)], 10);
        let p = project_z(&t, &[3.0, 3.0]).unwrap();
        assert!((p.yhat - 3.0).abs() < 1e-15);
        assert!(p.z[0].abs() < 1e-15);
        assert!(p.residual < 1e-15);
    }

    #[test]
    fn recovers_increment_coefficient() {
        // one atom: G = Σ P ΔH² and rhs = Σ P ΔH², so z = 1 by hand
        let t = tree(&[(1.0, 1.0)], 10);
        let v: Vec<f64> = (0..2).map(|o| t.increment(o)[0]).collect();
        let p = project_z(&t, &v).unwrap();
        assert!(p.yhat.abs() < 1e-15);
        assert!((p.z[0] - 1.0).abs() < 1e-14);
        assert!(p.residual < 1e-15);
    }

    #[test]
    fn one_atom_span_is_full() {
        let t = tree(&[(1.0, 1.0)], 10);
        for v in [[0.0, 1.0], [5.0, -2.0], [1e3, 1e-3]] {
            assert!(project_z(&t, &v).unwrap().residual < 1e-12);
        }
    }

    #[test]
    fn two_atom_recovers_combination() {
        let t = tree(&[(1.0, 1.0), (-0.5, 2.0)], 20);
        let v: Vec<f64> = (0..3)
            .map(|o| 0.7 + 2.0 * t.increment(o)[0] - 1.5 * t.increment(o)[1])
            .collect();
        let p = project_z(&t, &v).unwrap();
        assert!((p.yhat - 0.7).abs() < 1e-13);
        assert!((p.z[0] - 2.0).abs() < 1e-12);
        assert!((p.z[1] + 1.5).abs() < 1e-12);
    }

    #[test]
    fn wrong_arity() {
        let t = tree(&[(1.0, 1.0)], 10);
        assert!(project_z(&t, &[1.0]).is_err());
    }
}
