//! Gyroid level set, isosurface meshing and edge voxelization.
//!
//! The pipeline is `sample_level_set` → `extract_isosurface` →
//! `voxelize_surface`; [`voxelized_gyroid`] chains the three.

mod level_set;
mod marching_cubes;
mod tables;
mod voxelize;

pub use level_set::{sample_level_set, ScalarField, TpmsSpec};
pub use marching_cubes::{extract_isosurface, TriangleMesh};
pub use voxelize::{voxelize_surface, VoxelRule, DEFAULT_STRUT_RADIUS};

use crate::error::Result;
use crate::grid::DensityGrid;

/// Binary voxel model of a Gyroid cell at `resolution` voxels per axis.
pub fn voxelized_gyroid(spec: &TpmsSpec, resolution: [usize; 3], rule: VoxelRule) -> Result<DensityGrid> {
    let field = sample_level_set(spec)?;
    let mesh = extract_isosurface(&field)?;
    voxelize_surface(&mesh, resolution, spec.lengths, rule)
}

/// The reference initial design: `c = 0`, 1 cm cell, 15 mesh points, strut rule.
pub fn default_gyroid(n: usize) -> Result<DensityGrid> {
    voxelized_gyroid(&TpmsSpec::default(), [n; 3], VoxelRule::default())
}

/// Mean voxel density of a grid.
pub fn relative_density(grid: &DensityGrid) -> f64 {
    grid.relative_density()
}
