//! Image-based reaction-diffusion in porous media.
//!
//! The pipeline turns a binary voxel mask into a signed distance function
//! ([`levelset`]), keeps only the transport phase on a chunked sparse grid
//! ([`grid`], [`geometry`]) and integrates inhomogeneous reaction-diffusion
//! with no-flux walls on it ([`solver`]). [`analysis`] builds FRAP-based
//! tortuosity estimates on top; [`verification`] holds the convergence
//! studies.
//!
//! Everything numeric is generic over [`Real`] (`f32` or `f64`); the
//! aliases below name the common instantiations.

// `!(x < y)` checks are written that way so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod field;
pub mod geometry;
pub mod grid;
pub mod io;
pub mod levelset;
pub mod scalar;
pub mod solver;
pub mod verification;

pub use error::{Error, Result};
pub use field::DenseField;
pub use grid::{GridGeometry, NodeIndex, SparseBlockGrid};
pub use scalar::{Precision, Real};

pub type SparseGrid64 = SparseBlockGrid<f64>;
pub type SparseGrid32 = SparseBlockGrid<f32>;
pub type DenseField64 = DenseField<f64>;
pub type DenseField32 = DenseField<f32>;
pub type Geometry64 = GridGeometry<f64>;
pub type Geometry32 = GridGeometry<f32>;
