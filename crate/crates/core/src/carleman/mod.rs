//! Carleman weights and what is built on them: the discrete weighted identity
//! and the observability sweep.

mod identity;
mod sweep;
mod weight;

pub use identity::{weighted_identity_residual, Closure, IdentityReport};
pub use sweep::{observability_sweep, SweepConfig, SweepReport, SweepRow, CONTRACTION_TARGET, DEFAULT_LAMBDAS, SWEEP_COLUMNS};
pub use weight::{choose_beta, CarlemanWeight};
