//! Vortices on the plane, on a flat torus with prescribed background
//! curvature, and monopoles on their product.

pub mod error;
pub mod geometry;

pub use error::{Result, VortexError};
pub mod bundles;
pub mod cli_io;
pub mod decay_analysis;
pub mod plane_vortex;
pub mod product_monopole;
pub mod surface_vortex;
