//! Voxelized Gyroid unit cells, periodic homogenization and SIMP topology
//! optimization for generating (parameters → optimized topology) datasets.

pub mod dataset;
pub mod error;
pub mod grid;
pub mod homogenize;
pub mod topopt;
pub mod tpms;

pub use error::{Error, Result};
pub use grid::DensityGrid;
