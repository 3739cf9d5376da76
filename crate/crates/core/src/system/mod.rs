//! System definitions: coefficient fields, config format, bundled examples and
//! the characteristic decomposition at the boundary.

pub mod config;
pub mod decomposition;
pub mod domain;
pub mod poly;
pub mod registry;
pub mod spec;

pub use config::{load_system, parse_system, to_toml, SystemConfig};
pub use decomposition::{boundary_decomposition, recompose, split_state, BoundaryDecomposition, CharacteristicSplit, DEFAULT_ZERO_TOL};
pub use domain::{Domain, Face};
pub use poly::{Poly, PolyMatrix};
pub use spec::{CoefField, Coefficients, SystemSpec};
