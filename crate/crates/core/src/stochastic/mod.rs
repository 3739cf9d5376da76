//! Binary scenario tree for the Brownian driver and the exact forward/backward
//! solvers on it.

mod process;
mod solver;
mod tree;

pub use process::AdaptedProcess;
pub use solver::{AdjointSolution, DualityReport, Solver};
pub use tree::{ScenarioTree, DEFAULT_DEPTH, MAX_DEPTH};
