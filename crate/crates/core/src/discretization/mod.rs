//! Uniform grids and the explicit transport step with its characteristic ghost-cell closure.
//!
//! Ghost values keep the outgoing and zero characteristic components of the adjacent
//! cell and replace the incoming ones with the boundary data `u`.

mod grid;
pub mod sparse;

pub use grid::{
    build_grid, build_grid_with, extract_trace, incoming_of_constant, transport_step, BoundaryCell, BoundaryTrace, FluxKind, Grid,
    StateField, TraceEntry, DEFAULT_CFL, MIN_CELLS,
};
pub use sparse::Csr;
