use crate::error::{invalid, Result};

/// Raw weight `w_ij` as a function of the centroid distance `d_ij`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FilterKernel {
    /// `max(0, r_min − d²)`. Reaches only face neighbours for `r_min < 2`.
    #[default]
    Squared,
    /// `max(0, r_min − d)`, the classic cone.
    Linear,
}

impl FilterKernel {
    pub fn weight(self, r_min: f64, d: f64) -> f64 {
        match self {
            FilterKernel::Squared => r_min - d * d,
            FilterKernel::Linear => r_min - d,
        }
    }

    /// Largest per-axis offset that can carry a positive weight.
    fn reach(self, r_min: f64) -> i64 {
        match self {
            FilterKernel::Squared => r_min.sqrt().floor() as i64,
            FilterKernel::Linear => r_min.floor() as i64,
        }
    }
}

/// Normalized density filter `ρ = W̄ η` on a periodic voxel grid.
///
/// Weights come from the [`FilterKernel`] evaluated at the minimum-image
/// distance between voxel centroids (element units); rows sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterOperator {
    resolution: [usize; 3],
    r_min: f64,
    kernel: FilterKernel,
    rows: Vec<Vec<(u32, f64)>>,
}

/// Builds the filter with the default (squared-distance) kernel.
pub fn build_filter(resolution: [usize; 3], r_min: f64) -> Result<FilterOperator> {
    build_filter_with(resolution, r_min, FilterKernel::default())
}

/// Builds the filter. Duplicate periodic images on very small grids are counted once.
pub fn build_filter_with(resolution: [usize; 3], r_min: f64, kernel: FilterKernel) -> Result<FilterOperator> {
    if !(r_min >= 0.0) || !r_min.is_finite() {
        return Err(invalid(format!("filter radius must be non-negative, got {r_min}")));
    }
    if resolution.iter().any(|&n| n == 0) {
        return Err(invalid(format!("resolution must be positive, got {resolution:?}")));
    }
    let [nx, ny, nz] = resolution;
    let reach = kernel.reach(r_min);
    let mut rows = Vec::with_capacity(nx * ny * nz);
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                let mut row: Vec<(u32, f64)> = Vec::new();
                for dz in -reach..=reach {
                    for dy in -reach..=reach {
                        for dx in -reach..=reach {
                            let (ti, di) = wrap(i, dx, nx);
                            let (tj, dj) = wrap(j, dy, ny);
                            let (tk, dk) = wrap(k, dz, nz);
                            let d = ((di * di + dj * dj + dk * dk) as f64).sqrt();
                            let w = kernel.weight(r_min, d);
                            if w <= 0.0 {
                                continue;
                            }
                            let target = (ti + nx * (tj + ny * tk)) as u32;
                            if !row.iter().any(|&(t, _)| t == target) {
                                row.push((target, w));
                            }
                        }
                    }
                }
                // r_min = 0 leaves the self weight at zero; fall back to identity
                if row.is_empty() {
                    row.push(((i + nx * (j + ny * k)) as u32, 1.0));
                }
                row.sort_by_key(|&(t, _)| t);
                let total: f64 = row.iter().map(|&(_, w)| w).sum();
                for entry in &mut row {
                    entry.1 /= total;
                }
                rows.push(row);
            }
        }
    }
    Ok(FilterOperator {
        resolution,
        r_min,
        kernel,
        rows,
    })
}

/// Target index and minimum-image offset of `c + d` on a ring of `n`.
fn wrap(c: usize, d: i64, n: usize) -> (usize, i64) {
    let n = n as i64;
    let t = (c as i64 + d).rem_euclid(n);
    let mut delta = (t - c as i64).rem_euclid(n);
    if delta > n / 2 {
        delta -= n;
    }
    (t as usize, delta.abs())
}

impl FilterOperator {
    pub fn resolution(&self) -> [usize; 3] {
        self.resolution
    }

    pub fn r_min(&self) -> f64 {
        self.r_min
    }

    pub fn kernel(&self) -> FilterKernel {
        self.kernel
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Nonzeros `(column, weight)` of row `i`, sorted by column.
    pub fn row(&self, i: usize) -> &[(u32, f64)] {
        &self.rows[i]
    }

    pub fn apply(&self, eta: &[f64]) -> Vec<f64> {
        assert_eq!(eta.len(), self.rows.len());
        self.rows
            .iter()
            .map(|row| row.iter().map(|&(j, w)| w * eta[j as usize]).sum::<f64>())
            .collect()
    }

    /// `W̄ᵀ x`, used to chain sensitivities back to the design variables.
    pub fn apply_transpose(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.rows.len());
        let mut out = vec![0.0; x.len()];
        for (row, &xi) in self.rows.iter().zip(x) {
            for &(j, w) in row {
                out[j as usize] += w * xi;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_radius_is_identity() {
        let f = build_filter_with([4, 3, 5], 1.0, FilterKernel::Linear).unwrap();
        let g = build_filter([4, 3, 5], 1.0).unwrap();
        assert_eq!(f.rows, g.rows);
        for i in 0..f.len() {
            assert_eq!(f.row(i), &[(i as u32, 1.0)]);
        }
    }

    #[test]
    fn linear_kernel_radius_one_and_a_half() {
        // brute force: every offset in the 3×3×3 block with d < 1.5 — self, 6 faces (d=1)
        // and 12 edges (d=√2); corners (d=√3) fall outside
        let f = build_filter_with([5, 5, 5], 1.5, FilterKernel::Linear).unwrap();
        let edge = 1.5 - 2f64.sqrt();
        let total = 1.5 + 6.0 * 0.5 + 12.0 * edge;
        for i in 0..f.len() {
            let row = f.row(i);
            assert_eq!(row.len(), 19);
            let mut by_weight = row.iter().map(|&(j, w)| (j as usize == i, w)).collect::<Vec<_>>();
            by_weight.sort_by(|a, b| b.1.total_cmp(&a.1));
            assert!(by_weight[0].0);
            assert!((by_weight[0].1 - 1.5 / total).abs() < 1e-15);
            assert!(by_weight[1..7].iter().all(|&(_, w)| (w - 0.5 / total).abs() < 1e-15));
            assert!(by_weight[7..].iter().all(|&(_, w)| (w - edge / total).abs() < 1e-15));
        }
    }

    #[test]
    fn squared_kernel_radius_one_and_a_half() {
        // d² = 1 for faces (weight 0.5), d² = 2 already beyond 1.5
        let f = build_filter([5, 5, 5], 1.5).unwrap();
        for i in 0..f.len() {
            let row = f.row(i);
            assert_eq!(row.len(), 7);
            for &(j, w) in row {
                let expect = if j as usize == i { 1.5 / 4.5 } else { 0.5 / 4.5 };
                assert!((w - expect).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn squared_kernel_reaches_edges_at_two_and_a_half() {
        let f = build_filter([6, 6, 6], 2.5).unwrap();
        let row = f.row(0);
        assert_eq!(row.len(), 19);
        let total = 2.5 + 6.0 * 1.5 + 12.0 * 0.5;
        assert!((row[0].1 - 2.5 / total).abs() < 1e-15);
    }

    #[test]
    fn wraps_across_faces() {
        let f = build_filter_with([4, 4, 4], 1.2, FilterKernel::Linear).unwrap();
        let cols: Vec<u32> = f.row(0).iter().map(|&(j, _)| j).collect();
        // self, +x, −x (=3), +y, −y (=12), +z, −z (=48)
        assert_eq!(cols, vec![0, 1, 3, 4, 12, 16, 48]);
        let w: Vec<f64> = f.row(0).iter().map(|&(_, w)| w).collect();
        assert!((w[0] - 1.2 / 2.4).abs() < 1e-15);
        assert!(w[1..].iter().all(|&v| (v - 0.2 / 2.4).abs() < 1e-15));
    }

    #[test]
    fn tiny_grid_counts_each_image_once() {
        // on a 2-wide axis ±1 reach the same neighbour
        let f = build_filter([2, 1, 1], 1.5).unwrap();
        assert_eq!(f.row(0).len(), 2);
        assert!((f.row(0)[0].1 - 0.75).abs() < 1e-15);
    }

    #[test]
    fn transpose_is_adjoint() {
        let f = build_filter([4, 5, 3], 2.3).unwrap();
        let x: Vec<f64> = (0..60).map(|i| ((i * 13) % 7) as f64).collect();
        let y: Vec<f64> = (0..60).map(|i| ((i * 5) % 11) as f64 - 3.0).collect();
        let lhs: f64 = f.apply(&x).iter().zip(&y).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.iter().zip(f.apply_transpose(&y)).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-10);
    }
}
