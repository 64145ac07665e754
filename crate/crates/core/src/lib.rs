//! Finite-difference micromagnetics on a box, built around the helical
//! derivative `∂_i^h u = l_ex ∂_i u + (κ/l_ex) u × e_i`.
//!
//! The numerical core is generic over [`Real`] (`f32` or `f64`); the aliases
//! at the crate root fix it to `f64`, with `*32` variants for single
//! precision.

pub mod cli;
pub mod demag;
pub mod dynamics;
pub mod energy;
pub mod error;
pub mod grid;
pub mod io;
pub mod lab;
pub mod lowerorder;
pub mod scalar;
pub mod vec3;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Vec3 = vec3::Vec3<f64>;
pub type Grid = grid::Grid<f64>;
pub type VectorField = grid::VectorField<f64>;
pub type MagnetizationField = grid::MagnetizationField<f64>;
pub type HelicalGradient = grid::HelicalGradient<f64>;
pub type MaterialParams = lowerorder::MaterialParams<f64>;
pub type AppliedField = lowerorder::AppliedField<f64>;
pub type DemagTensor = demag::DemagTensor<f64>;

pub type Vec3f32 = vec3::Vec3<f32>;
pub type Grid32 = grid::Grid<f32>;
pub type VectorField32 = grid::VectorField<f32>;
pub type MagnetizationField32 = grid::MagnetizationField<f32>;
pub type MaterialParams32 = lowerorder::MaterialParams<f32>;
pub type DemagTensor32 = demag::DemagTensor<f32>;
