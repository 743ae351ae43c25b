//! Regulated (làdlàg) paths, barriers and the right-jump stopping arrays.

mod barrier;
mod path;

pub use barrier::{make_barrier, Barrier, BarrierFamily, BarrierSpec, RightJump};
pub use path::{left_envelope, right_jump_times, JumpArray, RegulatedPath};
