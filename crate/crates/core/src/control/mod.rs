//! Control-to-state map and min-norm exact controls, with spectrum estimates
//! for the Gramian.

mod map;
mod mean;
mod spectrum;
mod synthesis;

pub use map::{assemble_control_map, ChannelOptions, ControlMap, ControlPair, DenseControlMap, DEFAULT_DENSE_LIMIT};
pub use mean::mean_invariance_probe;
pub use spectrum::{
    lanczos_extremes, leaf_from, observability_spectrum, operator_spectrum, power_iteration, GramianOperator, LanczosExtremes, Spectrum,
    SymOperator, MIN_SPECTRUM_ITERS,
};
pub use synthesis::{synthesize_control, ControlReport, DEFAULT_MAX_ITER, DEFAULT_TOL};
