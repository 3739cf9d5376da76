//! Numerical toolkit for exact controllability of stochastic first-order
//! symmetric hyperbolic systems
//!
//! ```text
//! dy + Σ A_i(x) y_{x_i} dt = (B1 y + B3 v) dt + (B2 y + v) dW,   ζ₋ = u on the boundary
//! ```
//!
//! The crate is organized bottom-up:
//!
//! * [`system`]: coefficient fields with their config format, plus the bundled examples.
//! * [`geometry`]: the decay condition for a weight η and the minimal control time.
//! * [`discretization`]: uniform grids and the explicit transport step.
//! * [`stochastic`]: scenario tree with the forward and transpose-defined backward solvers.
//! * [`control`]: control-to-state map and min-norm control synthesis.
//! * [`carleman`]: Carleman weights and the observability sweep.

pub mod carleman;
pub mod control;
pub mod discretization;
mod error;
pub mod geometry;
pub mod linalg;
pub mod output;
pub mod rng;
pub mod stochastic;
pub mod system;

pub use error::{Error, Result};

/// Crate version, echoed into run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
