//! Topological invariants: Chern number, exceptional-point vorticity,
//! generalized `kx`-resolved vorticity with its flipping index, and the
//! Jacobian of the band map.

pub mod berry;
pub mod jacobian;
pub mod vorticity;

use thiserror::Error;

pub use berry::{berry_curvature, chern_number, ChernResult, SqrtBranch};
pub use jacobian::{closed_form_det, jacobian_analytic, jacobian_numeric, jacobian_zero_locus, JacobianValue};
pub use vorticity::{
    flip_point, flipping_index, gen_vorticity, loop_orientation, vorticity, FlippingIndex, GenVorticity,
    Orientation, VorticityResult,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InvariantError {
    #[error("NormalizationSingular: |h·h| vanishes at k=({kx}, {ky})")]
    NormalizationSingular { kx: f64, ky: f64 },
    #[error("DegenerateOnLoop: bands coincide at k=({kx}, {ky})")]
    DegenerateOnLoop { kx: f64, ky: f64 },
    #[error("UnderSampled: phase increment {increment} exceeds pi/2")]
    UnderSampled { increment: f64 },
    #[error("OffsetOnCurve: offset point lies on the ky curve at kx={kx}")]
    OffsetOnCurve { kx: f64 },
    #[error("MultipleFlips: orientation changes at {0:?}")]
    MultipleFlips(Vec<f64>),
    #[error("GaplessPoint: |E| vanishes at k=({kx}, {ky})")]
    GaplessPoint { kx: f64, ky: f64 },
    #[error("InvalidSampling: {n} ky samples, need at least {min}")]
    InvalidSampling { n: usize, min: usize },
    #[error("InvalidStep: finite-difference step {0} outside [1e-7, 1e-3]")]
    InvalidStep(f64),
    #[error("InvalidRange: kx range [{lo}, {hi}] must lie within [-pi, 0]")]
    InvalidRange { lo: f64, hi: f64 },
}
