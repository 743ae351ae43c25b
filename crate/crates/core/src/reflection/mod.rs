//! Reflection at the barrier: the exact discrete Snell envelope, its Mertens
//! decomposition, the penalty sweep and the outer fixed-point loop.

mod mertens;
mod picard;
mod skorokhod;
mod snell;
mod sweep;

pub use mertens::{mertens_decompose, Mertens, MERTENS_TOL};
pub use picard::{picard_outer_loop, PicardResult, PicardStep};
pub use skorokhod::skorokhod_residual;
pub use snell::{snell_oracle, SnellInput};
pub use sweep::{penalization_sweep, ConvergenceReport, ConvergenceRow};
