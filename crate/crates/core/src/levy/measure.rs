use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One atom of a finite Lévy measure: jumps of size `x` arriving at rate `lambda`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub x: f64,
    pub lambda: f64,
}

/// Lévy measure with finitely many atoms, `ν = Σ λ_j δ_{x_j}`.
///
/// With finitely many atoms both the square-integrability and the
/// exponential-moment conditions hold for free, and the pure-jump process is
/// a compound Poisson process of rate `λ = Σ λ_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Atom>", into = "Vec<Atom>")]
pub struct LevyMeasure {
    atoms: Vec<Atom>,
}

impl LevyMeasure {
    pub fn new(atoms: Vec<Atom>) -> Result<Self> {
        for (i, a) in atoms.iter().enumerate() {
            if !a.x.is_finite() || a.x == 0.0 {
                return Err(Error::invalid(format!(
                    "atom {i}: jump size must be finite and nonzero, got {}",
                    a.x
                )));
            }
            if !a.lambda.is_finite() || a.lambda <= 0.0 {
                return Err(Error::invalid(format!(
                    "atom {i}: intensity must be finite and positive, got {}",
                    a.lambda
                )));
            }
            if atoms[..i].iter().any(|b| b.x == a.x) {
                return Err(Error::invalid(format!(
                    "atom {i}: duplicate jump size {}",
                    a.x
                )));
            }
        }
        Ok(Self { atoms })
    }

    /// Convenience constructor from `(x, λ)` pairs.
    pub fn from_pairs(pairs: &[(f64, f64)]) -> Result<Self> {
        Self::new(
            pairs
                .iter()
                .map(|&(x, lambda)| Atom { x, lambda })
                .collect(),
        )
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn total_intensity(&self) -> f64 {
        self.atoms.iter().map(|a| a.lambda).sum()
    }

    /// `∫ (1 ∧ x²) ν(dx)`.
    pub fn small_jump_integral(&self) -> f64 {
        self.atoms.iter().map(|a| a.lambda * (a.x * a.x).min(1.0)).sum()
    }
}

impl TryFrom<Vec<Atom>> for LevyMeasure {
    type Error = Error;

    fn try_from(atoms: Vec<Atom>) -> Result<Self> {
        Self::new(atoms)
    }
}

impl From<LevyMeasure> for Vec<Atom> {
    fn from(m: LevyMeasure) -> Self {
        m.atoms
    }
}

/// `m_i = ∫ x^i ν(dx) = Σ_j λ_j x_j^i`, the compensator rate of the i-th power-jump process.
pub fn moment(measure: &LevyMeasure, i: u32) -> f64 {
    assert!(i >= 1, "moment order must be at least 1");
    measure
        .atoms
        .iter()
        .map(|a| a.lambda * a.x.powi(i as i32))
        .sum()
}
