//! Checks built from the structure of the equation: comparison with the
//! Doléans-Dade exponential, the discrete energy identity, exactness of the
//! martingale representation and weighted a priori norms.

mod comparison;
mod energy;
mod gamma;
mod norms;
mod representation;

pub use comparison::{
    comparison_check, ComparisonInstance, ComparisonReport, NodeLinearization, NodeRef,
    COMPARISON_TOL,
};
pub use energy::energy_identity_residual;
pub use gamma::{doleans_gamma, GammaValue};
pub use norms::{beta_distance, beta_norms, BetaNorms};
pub use representation::{martingale_representation, representation_residual, Representation};
