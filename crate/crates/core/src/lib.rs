//! Complex band structure, pseudo-boundary states and topological invariants
//! of a two-band non-Hermitian Chern insulator.

pub mod bz_grid;
pub mod energy_plane;
pub mod model;
pub mod invariants;
pub mod pattern;
pub mod sweep;
pub mod cli;
