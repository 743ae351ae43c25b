use serde::Serialize;

use crate::error::{Error, Result};

/// Discrete Doléans-Dade exponential between two grid indices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GammaValue {
    /// `∏ (1 + p_r Δt + Σ_k ζ^k_r ΔH^(k)_r)`, the discrete linear equation.
    pub recursion: f64,
    /// `exp(Σ p_r Δt) ∏ (1 + Σ_k ζ^k_r ΔH^(k)_r)`; agrees with the recursion
    /// up to `O(Δt)` per unit time.
    pub closed_form: f64,
}

/// `Γ_{s,t}` for step coefficients `p[r]`, `zeta[r]` and increments `dh[r]`,
/// `r = s..t`.
pub fn doleans_gamma(
    p: &[f64],
    zeta: &[Vec<f64>],
    dh: &[Vec<f64>],
    dt: f64,
    s: usize,
    t: usize,
) -> Result<GammaValue> {
    if s > t || t > p.len() || zeta.len() != p.len() || dh.len() != p.len() {
        return Err(Error::invalid("inconsistent coefficient paths or indices"));
    }
    let mut recursion = 1.0;
    let mut log_jump = 0.0;
    let mut drift = 0.0;
    for r in s..t {
        if zeta[r].len() != dh[r].len() {
            return Err(Error::invalid(format!("dimension mismatch at step {r}")));
        }
        let jump: f64 = zeta[r].iter().zip(&dh[r]).map(|(a, b)| a * b).sum();
        if 1.0 + jump <= 0.0 {
            return Err(Error::AssumptionViolation {
                step: r,
                detail: format!("Σ ζ ΔH = {jump} ≤ -1"),
            });
        }
        let factor = 1.0 + p[r] * dt + jump;
        if factor <= 0.0 {
            return Err(Error::AssumptionViolation {
                step: r,
                detail: format!("step factor {factor} ≤ 0"),
            });
        }
        recursion *= factor;
        log_jump += jump.ln_1p();
        drift += p[r] * dt;
    }
    Ok(GammaValue {
        recursion,
        closed_form: (drift + log_jump).exp(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trivial_coefficients() {
        let g = doleans_gamma(&[0.0; 5], &vec![vec![0.0]; 5], &vec![vec![0.3]; 5], 0.1, 0, 5).unwrap();
        assert_eq!(g.recursion, 1.0);
        assert_eq!(g.closed_form, 1.0);
    }

    #[test]
    fn compound_interest() {
        let n = 100;
        let g = doleans_gamma(&vec![1.0; n], &vec![vec![0.0]; n], &vec![vec![0.0]; n], 0.01, 0, n)
            .unwrap();
        assert!((g.recursion - 1.01f64.powi(100)).abs() < 1e-12);
        assert!((g.recursion - 2.7048).abs() < 1e-4);
        assert!((g.closed_form - std::f64::consts::E).abs() < 1e-12);
        assert!((g.closed_form - g.recursion).abs() < 0.01 * g.closed_form);
    }

    #[test]
    fn single_jump_step() {
        let g = doleans_gamma(&[0.0], &[vec![0.5]], &[vec![0.9]], 0.1, 0, 1).unwrap();
        assert!((g.recursion - 1.45).abs() < 1e-15);
        assert!((g.closed_form - 1.45).abs() < 1e-15);
    }

    #[test]
    fn sub_interval_and_violation() {
        let p = vec![0.0, 0.0, 0.0];
        let z = vec![vec![2.0], vec![2.0], vec![2.0]];
        let dh = vec![vec![0.1], vec![-0.6], vec![0.1]];
        let g = doleans_gamma(&p, &z, &dh, 0.1, 2, 3).unwrap();
        assert!((g.recursion - 1.2).abs() < 1e-15);
        let err = doleans_gamma(&p, &z, &dh, 0.1, 0, 3).unwrap_err();
        assert!(matches!(err, Error::AssumptionViolation { step: 1, .. }), "{err}");
        assert!(doleans_gamma(&p, &z, &dh, 0.1, 2, 1).is_err());
    }
}
