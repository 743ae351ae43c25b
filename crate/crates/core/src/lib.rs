pub mod cli;
pub mod config;
pub mod error;
pub mod levy;
pub mod reflection;
pub mod regulated;
pub mod rng;
pub mod solver;
pub mod verify;

pub use error::{Error, Result};
