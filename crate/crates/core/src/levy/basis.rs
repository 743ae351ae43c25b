//! Orthonormalized power-jump (Teugels) martingales.
//!
//! The compensated power-jump processes `Y^(j)_t = L^(j)_t - t m_j` are
//! strongly orthogonalized through polynomials `q_i(x) = Σ_j α_ij x^(j-1)`
//! that are orthonormal for `<p, q> = ∫ p q x² ν(dx)`. The resulting
//! martingales `H^(i) = Σ_j α_ij Y^(j)` have predictable bracket `δ_ij t`.

use serde::Serialize;

use super::measure::{moment, LevyMeasure};
use crate::error::{Error, Result};

pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// One-step outcome of the jump part on a grid interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Outcome {
    None,
    Jump(f64),
}

#[derive(Debug, Clone, Serialize)]
pub struct TeugelsBasis {
    /// Row `i` holds `α_{i+1, 1..=i+1}`; the matrix is lower triangular.
    alpha: Vec<Vec<f64>>,
    /// `moments[i - 1] = m_i` for `i = 1..=2m+1`.
    moments: Vec<f64>,
    /// `(x_j, λ_j x_j²)`: support and weights of the inner product.
    #[serde(skip)]
    support: Vec<(f64, f64)>,
    /// `q_i(x_j)` as produced by the orthogonalization, row per basis element.
    #[serde(skip)]
    q_at_atoms: Vec<Vec<f64>>,
    /// `Σ_j α_ij m_j = ∫ x q_i(x) ν(dx)`, the drift of `H^(i)`.
    #[serde(skip)]
    compensator: Vec<f64>,
}

impl TeugelsBasis {
    pub fn dim(&self) -> usize {
        self.alpha.len()
    }

    pub fn alpha(&self) -> &[Vec<f64>] {
        &self.alpha
    }

    /// `α_ij` with 1-based indices; zero above the diagonal.
    pub fn alpha_ij(&self, i: usize, j: usize) -> f64 {
        if j > i {
            0.0
        } else {
            self.alpha[i - 1][j - 1]
        }
    }

    pub fn moments(&self) -> &[f64] {
        &self.moments
    }

    /// `m_i`, 1-based.
    pub fn moment(&self, i: usize) -> f64 {
        self.moments[i - 1]
    }

    /// `q_i(x)`, 1-based.
    pub fn q(&self, i: usize, x: f64) -> f64 {
        if let Some(j) = self.support.iter().position(|&(a, _)| a == x) {
            return self.q_at_atoms[i - 1][j];
        }
        self.alpha[i - 1]
            .iter()
            .enumerate()
            .map(|(j, a)| a * x.powi(j as i32))
            .sum()
    }

    /// Jump of `H^(i)` at a jump of size `x`: `q_i(x) x`.
    pub fn jump_part(&self, i: usize, x: f64) -> f64 {
        self.q(i, x) * x
    }

    /// Gram matrix of `{q_i}` under `x² ν(dx)`.
    pub fn gram_matrix(&self) -> Vec<Vec<f64>> {
        let m = self.dim();
        let mut g = vec![vec![0.0; m]; m];
        for (a, row) in g.iter_mut().enumerate() {
            for (b, v) in row.iter_mut().enumerate() {
                *v = self
                    .support
                    .iter()
                    .map(|&(x, w)| w * self.q(a + 1, x) * self.q(b + 1, x))
                    .sum();
            }
        }
        g
    }
}

fn weighted_dot(w: &[f64], u: &[f64], v: &[f64]) -> f64 {
    w.iter().zip(u).zip(v).map(|((w, u), v)| w * u * v).sum()
}

/// Gram–Schmidt on the monomials `1, x, x², …` under `∫ p q x² ν(dx)`.
///
/// Polynomials are carried as their values at the atoms, where the inner
/// product is a finite weighted sum. Each candidate is orthogonalized twice.
/// Iteration stops once a residual norm falls below `rank_tol` relative to the
/// norm of the monomial it came from, which happens after as many monomials
/// as there are atoms.
pub fn teugels_basis(measure: &LevyMeasure, rank_tol: f64) -> Result<TeugelsBasis> {
    if measure.is_empty() {
        return Err(Error::invalid("Lévy measure has no atoms"));
    }
    if !(rank_tol > 0.0) {
        return Err(Error::invalid(format!("rank_tol must be positive, got {rank_tol}")));
    }
    let xs: Vec<f64> = measure.atoms().iter().map(|a| a.x).collect();
    let weights: Vec<f64> = measure
        .atoms()
        .iter()
        .map(|a| a.lambda * a.x * a.x)
        .collect();

    let mut values: Vec<Vec<f64>> = Vec::new();
    let mut alpha: Vec<Vec<f64>> = Vec::new();

    for degree in 0..xs.len() {
        let mut v: Vec<f64> = xs.iter().map(|x| x.powi(degree as i32)).collect();
        let mut coeffs = vec![0.0; degree + 1];
        coeffs[degree] = 1.0;
        let start_norm = weighted_dot(&weights, &v, &v).sqrt();

        for _ in 0..2 {
            for (u, a) in values.iter().zip(&alpha) {
                let proj = weighted_dot(&weights, &v, u);
                for (vi, ui) in v.iter_mut().zip(u) {
                    *vi -= proj * ui;
                }
                for (ci, ai) in coeffs.iter_mut().zip(a) {
                    *ci -= proj * ai;
                }
            }
        }

        let norm = weighted_dot(&weights, &v, &v).sqrt();
        if norm < rank_tol * start_norm.max(1.0) {
            break;
        }
        v.iter_mut().for_each(|vi| *vi /= norm);
        coeffs.iter_mut().for_each(|ci| *ci /= norm);
        values.push(v);
        alpha.push(coeffs);
    }

    let m = alpha.len();
    let moments = (1..=(2 * m + 1) as u32).map(|i| moment(measure, i)).collect();
    let compensator = values
        .iter()
        .map(|q| {
            measure
                .atoms()
                .iter()
                .zip(q)
                .map(|(a, qj)| a.lambda * a.x * qj)
                .sum()
        })
        .collect();
    let support = xs.into_iter().zip(weights).collect();
    Ok(TeugelsBasis {
        alpha,
        moments,
        support,
        q_at_atoms: values,
        compensator,
    })
}

/// Increment of `(H^(1), …, H^(m))` over a step of length `dt` with the given outcome.
///
/// `ΔY^(j) = x^j - m_j dt` on a jump of size `x` and `-m_j dt` otherwise;
/// `ΔH^(i) = Σ_j α_ij ΔY^(j)`.
pub fn teugels_increment(basis: &TeugelsBasis, outcome: Outcome, dt: f64) -> Vec<f64> {
    // Σ_j α_ij (x^j - m_j dt) = x q_i(x) - dt Σ_j α_ij m_j
    (1..=basis.dim())
        .map(|i| {
            let drift = -basis.compensator[i - 1] * dt;
            match outcome {
                Outcome::None => drift,
                Outcome::Jump(x) => basis.jump_part(i, x) + drift,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    /// Independent route: Cholesky of the Hankel moment matrix `[m_{a+b+2}]`.
    /// The orthonormal coefficients are the rows of the inverse Cholesky factor.
    fn cholesky_alpha(measure: &LevyMeasure, dim: usize) -> DMatrix<f64> {
        let h = DMatrix::from_fn(dim, dim, |a, b| moment(measure, (a + b + 2) as u32));
        let l = h.cholesky().expect("moment matrix is positive definite").l();
        l.try_inverse().unwrap()
    }

    fn approx_eq(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn single_unit_atom() {
        let nu = LevyMeasure::from_pairs(&[(1.0, 1.0)]).unwrap();
        let b = teugels_basis(&nu, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(b.dim(), 1);
        let oracle = cholesky_alpha(&nu, 1);
        assert!(approx_eq(b.alpha_ij(1, 1), oracle[(0, 0)], 1e-14));
        assert!(approx_eq(b.alpha_ij(1, 1), 1.0, 1e-14));
    }

    #[test]
    fn symmetric_pair() {
        let nu = LevyMeasure::from_pairs(&[(1.0, 1.0), (-1.0, 1.0)]).unwrap();
        let b = teugels_basis(&nu, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(b.dim(), 2);
        let oracle = cholesky_alpha(&nu, 2);
        let s = 1.0 / 2f64.sqrt();
        for (i, j, want) in [(1, 1, s), (2, 1, 0.0), (2, 2, s)] {
            assert!(approx_eq(b.alpha_ij(i, j), want, 1e-14));
            assert!(approx_eq(b.alpha_ij(i, j), oracle[(i - 1, j - 1)], 1e-14));
        }
        assert!(approx_eq(b.q(1, 0.3), s, 1e-14));
        assert!(approx_eq(b.q(2, 0.3), 0.3 * s, 1e-14));
    }

    #[test]
    fn intense_unit_atom() {
        let nu = LevyMeasure::from_pairs(&[(1.0, 4.0)]).unwrap();
        let b = teugels_basis(&nu, DEFAULT_RANK_TOL).unwrap();
        assert!(approx_eq(b.alpha_ij(1, 1), 0.5, 1e-14));
        // H = (L - 4t) / 2
        let dh = teugels_increment(&b, Outcome::Jump(1.0), 0.1);
        assert!(approx_eq(dh[0], (1.0 - 0.4) / 2.0, 1e-14));
    }

    #[test]
    fn empty_measure_is_rejected() {
        let nu = LevyMeasure::new(vec![]).unwrap();
        assert!(matches!(
            teugels_basis(&nu, DEFAULT_RANK_TOL),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn unit_atom_increments() {
        let nu = LevyMeasure::from_pairs(&[(1.0, 1.0)]).unwrap();
        let b = teugels_basis(&nu, DEFAULT_RANK_TOL).unwrap();
        assert!(approx_eq(teugels_increment(&b, Outcome::Jump(1.0), 0.1)[0], 0.9, 1e-15));
        assert!(approx_eq(teugels_increment(&b, Outcome::None, 0.1)[0], -0.1, 1e-15));
    }

    #[test]
    fn increment_matches_power_jump_formula() {
        let nu = LevyMeasure::from_pairs(&[(0.5, 2.0), (-1.0, 1.0), (2.0, 0.3)]).unwrap();
        let b = teugels_basis(&nu, DEFAULT_RANK_TOL).unwrap();
        let dt = 0.01;
        for outcome in [Outcome::None, Outcome::Jump(0.5), Outcome::Jump(2.0), Outcome::Jump(0.7)] {
            let dh = teugels_increment(&b, outcome, dt);
            for i in 1..=3 {
                let direct: f64 = (1..=i)
                    .map(|j| {
                        let x_j = match outcome {
                            Outcome::None => 0.0,
                            Outcome::Jump(x) => x.powi(j as i32),
                        };
                        b.alpha_ij(i, j) * (x_j - moment(&nu, j as u32) * dt)
                    })
                    .sum();
                assert!((dh[i - 1] - direct).abs() < 1e-12, "{outcome:?} i={i}");
            }
        }
    }

    #[test]
    fn three_atoms_agree_with_cholesky_route() {
        let nu = LevyMeasure::from_pairs(&[(0.5, 2.0), (-1.0, 1.0), (2.0, 0.3)]).unwrap();
        let b = teugels_basis(&nu, DEFAULT_RANK_TOL).unwrap();
        let oracle = cholesky_alpha(&nu, 3);
        for i in 1..=3 {
            for j in 1..=i {
                assert!((b.alpha_ij(i, j) - oracle[(i - 1, j - 1)]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn moments_cover_twice_the_dimension() {
        let nu = LevyMeasure::from_pairs(&[(0.5, 2.0), (-1.0, 1.0), (2.0, 0.3)]).unwrap();
        let b = teugels_basis(&nu, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(b.dim(), 3);
        assert_eq!(b.moments().len(), 7);
        assert_eq!(b.moment(3), moment(&nu, 3));
    }

    fn arb_measure() -> impl Strategy<Value = LevyMeasure> {
        (1usize..=6)
            .prop_flat_map(|n| {
                (
                    proptest::sample::subsequence((0..40).collect::<Vec<i32>>(), n),
                    proptest::collection::vec(0.1f64..3.0, n),
                    proptest::collection::vec(-0.04f64..0.04, n),
                )
            })
            .prop_map(|(slots, lambdas, jitter)| {
                // slots on a 0.1 lattice in [-2, 2) with the origin removed keep atoms separated
                let atoms = slots
                    .iter()
                    .zip(&lambdas)
                    .zip(&jitter)
                    .map(|((&s, &l), &j)| {
                        let base = (s - 20) as f64 * 0.1;
                        let x = if s == 20 { 2.0 } else { base + j };
                        (x, l)
                    })
                    .collect::<Vec<_>>();
                LevyMeasure::from_pairs(&atoms).unwrap()
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn gram_matrix_is_identity(nu in arb_measure()) {
            let b = teugels_basis(&nu, DEFAULT_RANK_TOL).unwrap();
            prop_assert_eq!(b.dim(), nu.len());
            let g = b.gram_matrix();
            for (a, row) in g.iter().enumerate() {
                for (c, v) in row.iter().enumerate() {
                    let want = if a == c { 1.0 } else { 0.0 };
                    prop_assert!((v - want).abs() <= 1e-10, "G[{a}][{c}] = {v}");
                }
            }
            for (i, row) in b.alpha().iter().enumerate() {
                prop_assert!(row[i] > 0.0);
            }
        }

        #[test]
        fn one_step_increments_are_centered(nu in arb_measure(), dt in 1e-4f64..0.05) {
            let b = teugels_basis(&nu, DEFAULT_RANK_TOL).unwrap();
            let lam = nu.total_intensity();
            prop_assume!(lam * dt < 1.0);
            let mut mean = teugels_increment(&b, Outcome::None, dt);
            mean.iter_mut().for_each(|v| *v *= 1.0 - lam * dt);
            for a in nu.atoms() {
                let inc = teugels_increment(&b, Outcome::Jump(a.x), dt);
                for (m, v) in mean.iter_mut().zip(inc) {
                    *m += a.lambda * dt * v;
                }
            }
            for m in mean {
                prop_assert!(m.abs() <= 1e-12, "mean increment {m}");
            }
        }
    }
}
