use super::marching_cubes::TriangleMesh;
use crate::error::{invalid, Result};
use crate::grid::DensityGrid;

/// Strut radius (cm) that thickens the Gyroid sheet to the reference 58.7 % density
/// on a 1 cm cell at 32³.
pub const DEFAULT_STRUT_RADIUS: f64 = 0.1;

/// How a mesh edge marks voxels as solid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VoxelRule {
    /// Each edge is a cylindrical strut: a voxel is solid when its centre lies
    /// within `radius` (cm) of the segment.
    StrutRadius(f64),
    /// A voxel is solid when the segment meets its closed box (touching a face,
    /// edge or corner counts).
    EdgeCrossing,
}

impl Default for VoxelRule {
    fn default() -> Self {
        VoxelRule::StrutRadius(DEFAULT_STRUT_RADIUS)
    }
}

/// Rasterizes the edges of `mesh` into a binary grid covering `[0, L]³`.
pub fn voxelize_surface(
    mesh: &TriangleMesh,
    resolution: [usize; 3],
    cell_lengths: [f64; 3],
    rule: VoxelRule,
) -> Result<DensityGrid> {
    if resolution.iter().any(|&n| n < 2) {
        return Err(invalid(format!("voxel resolution must be at least 2 per axis, got {resolution:?}")));
    }
    if mesh.is_empty() {
        return Err(invalid("cannot voxelize an empty mesh"));
    }
    if let VoxelRule::StrutRadius(r) = rule {
        if !(r >= 0.0) || !r.is_finite() {
            return Err(invalid(format!("strut radius must be non-negative, got {r}")));
        }
    }
    let mut grid = DensityGrid::filled(resolution, 0.0, cell_lengths)?;
    let h = grid.voxel_size();
    let mut solid = vec![false; grid.len()];

    for [a, b] in mesh.edges() {
        let p = mesh.vertices[a as usize];
        let q = mesh.vertices[b as usize];
        match rule {
            VoxelRule::EdgeCrossing => mark_crossed(&mut solid, resolution, h, p, q),
            VoxelRule::StrutRadius(r) => mark_within(&mut solid, resolution, h, p, q, r),
        }
    }

    let densities = solid.iter().map(|&s| if s { 1.0 } else { 0.0 }).collect();
    grid = grid.with_densities(densities)?;
    Ok(grid)
}

fn flat(res: [usize; 3], i: usize, j: usize, k: usize) -> usize {
    i + res[0] * (j + res[1] * k)
}

fn mark_crossed(solid: &mut [bool], res: [usize; 3], h: [f64; 3], p: [f64; 3], q: [f64; 3]) {
    let mut lo = [0usize; 3];
    let mut hi = [0usize; 3];
    for a in 0..3 {
        let (mn, mx) = (p[a].min(q[a]), p[a].max(q[a]));
        // a voxel whose upper face sits exactly on `mn` still touches the segment
        let first = (mn / h[a]).ceil() as i64 - 1;
        let last = (mx / h[a]).floor() as i64;
        lo[a] = first.clamp(0, res[a] as i64 - 1) as usize;
        hi[a] = last.clamp(0, res[a] as i64 - 1) as usize;
    }
    for k in lo[2]..=hi[2] {
        for j in lo[1]..=hi[1] {
            for i in lo[0]..=hi[0] {
                let bmin = [i as f64 * h[0], j as f64 * h[1], k as f64 * h[2]];
                let bmax = [
                    (i + 1) as f64 * h[0],
                    (j + 1) as f64 * h[1],
                    (k + 1) as f64 * h[2],
                ];
                if segment_meets_box(p, q, bmin, bmax) {
                    solid[flat(res, i, j, k)] = true;
                }
            }
        }
    }
}

/// Slab test for a closed segment against a closed axis-aligned box.
pub(crate) fn segment_meets_box(p: [f64; 3], q: [f64; 3], bmin: [f64; 3], bmax: [f64; 3]) -> bool {
    let (mut t0, mut t1) = (0.0f64, 1.0f64);
    for a in 0..3 {
        let d = q[a] - p[a];
        if d == 0.0 {
            if p[a] < bmin[a] || p[a] > bmax[a] {
                return false;
            }
        } else {
            let (mut ta, mut tb) = ((bmin[a] - p[a]) / d, (bmax[a] - p[a]) / d);
            if ta > tb {
                std::mem::swap(&mut ta, &mut tb);
            }
            t0 = t0.max(ta);
            t1 = t1.min(tb);
            if t0 > t1 {
                return false;
            }
        }
    }
    true
}

fn mark_within(solid: &mut [bool], res: [usize; 3], h: [f64; 3], p: [f64; 3], q: [f64; 3], r: f64) {
    let mut lo = [0usize; 3];
    let mut hi = [0usize; 3];
    for a in 0..3 {
        let (mn, mx) = (p[a].min(q[a]) - r, p[a].max(q[a]) + r);
        let first = (mn / h[a] - 0.5).ceil() as i64;
        let last = (mx / h[a] - 0.5).floor() as i64;
        if last < 0 || first > res[a] as i64 - 1 {
            return;
        }
        lo[a] = first.clamp(0, res[a] as i64 - 1) as usize;
        hi[a] = last.clamp(0, res[a] as i64 - 1) as usize;
    }
    for k in lo[2]..=hi[2] {
        for j in lo[1]..=hi[1] {
            for i in lo[0]..=hi[0] {
                let c = [
                    (i as f64 + 0.5) * h[0],
                    (j as f64 + 0.5) * h[1],
                    (k as f64 + 0.5) * h[2],
                ];
                if point_segment_distance(c, p, q) <= r {
                    solid[flat(res, i, j, k)] = true;
                }
            }
        }
    }
}

pub(crate) fn point_segment_distance(c: [f64; 3], p: [f64; 3], q: [f64; 3]) -> f64 {
    let d = [q[0] - p[0], q[1] - p[1], q[2] - p[2]];
    let w = [c[0] - p[0], c[1] - p[1], c[2] - p[2]];
    let dd = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
    let t = if dd > 0.0 {
        ((w[0] * d[0] + w[1] * d[1] + w[2] * d[2]) / dd).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let e = [w[0] - t * d[0], w[1] - t * d[1], w[2] - t * d[2]];
    (e[0] * e[0] + e[1] * e[1] + e[2] * e[2]).sqrt()
}
