//! Finite-atom Lévy measures, their Teugels martingale basis, exact path
//! simulation and the branching scenario model used by the solvers.

mod basis;
mod measure;
mod simulate;
mod tree;

pub use basis::{teugels_basis, teugels_increment, Outcome, TeugelsBasis, DEFAULT_RANK_TOL};
pub use measure::{moment, Atom, LevyMeasure};
pub use simulate::{empirical_bracket, simulate_levy_path, JumpEvent};
pub use tree::{build_tree, ScenarioTree, TreeOptions};
