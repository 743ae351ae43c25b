//! Backward induction for the penalized doubly stochastic equation on the
//! scenario lattice.
//!
//! Conditional expectations over the jump branches are exact; the Brownian
//! path of a scenario is known from time zero, so `ΔB_k` enters each step as
//! a number.

mod drivers;
mod extract;
mod penalized;
mod projection;

pub use drivers::{DriverFamily, DriverPair, DriverSpec};
pub use extract::{extract_k, KReport, K_FAIL_TOL, K_MATCH_TOL};
pub use penalized::{
    implicit_penalty_step, solve_penalized, solve_penalized_with, NoiseCoefficient,
    ScenarioSolution, SolutionTriple, STIFF_PENALTY,
};
pub use projection::{project_z, Projection};

#[allow(unused_imports)]
pub(crate) use penalized::{backward, NodeState, StepInput};
