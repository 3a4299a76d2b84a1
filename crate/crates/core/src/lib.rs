//! Tangent and paratangent cones, the Grassmannian distance between
//! subspaces, Hausdorff densities, and C1-manifold tests built on them.

pub mod classifier;
pub mod cli;
pub mod cones;
pub mod config;
pub mod density;
pub mod error;
pub mod grassmann;
mod nonfinite;
pub mod report;
pub mod rng;
pub mod setmodel;
pub mod vecmath;

pub use error::{Error, Result};
