use std::f64::consts::TAU;

use crate::error::{invalid, Result};

/// Parameters of a Gyroid unit cell and the resolution used to sample it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TpmsSpec {
    /// Level-set constant; `0` gives the two congruent labyrinths.
    pub c: f64,
    /// Cell edge lengths in cm.
    pub lengths: [f64; 3],
    /// Samples per axis, both cell faces included.
    pub mesh_points: usize,
}

impl Default for TpmsSpec {
    fn default() -> Self {
        Self {
            c: 0.0,
            lengths: [1.0; 3],
            mesh_points: 15,
        }
    }
}

impl TpmsSpec {
    pub fn validate(&self) -> Result<()> {
        if self.lengths.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
            return Err(invalid(format!("cell lengths must be positive, got {:?}", self.lengths)));
        }
        if self.mesh_points < 2 {
            return Err(invalid(format!("mesh_points must be >= 2, got {}", self.mesh_points)));
        }
        if !self.c.is_finite() {
            return Err(invalid("level-set constant must be finite"));
        }
        Ok(())
    }

    /// Gyroid level-set value minus `c` at a point (cm).
    pub fn eval(&self, x: f64, y: f64, z: f64) -> f64 {
        let [lx, ly, lz] = self.lengths;
        let (sx, cx) = (TAU * x / lx).sin_cos();
        let (sy, cy) = (TAU * y / ly).sin_cos();
        let (sz, cz) = (TAU * z / lz).sin_cos();
        sx * cy + sy * cz + sz * cx - self.c
    }
}

/// Samples of a scalar function on a regular lattice that includes both
/// boundary planes of every axis.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    pub fn at(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[self.index(i, j, k)]
    }

    pub fn point(&self, i: usize, j: usize, k: usize) -> [f64; 3] {
        [
            i as f64 * self.spacing[0],
            j as f64 * self.spacing[1],
            k as f64 * self.spacing[2],
        ]
    }

    /// Trilinear interpolation of the samples at a point inside the lattice.
    pub fn interpolate(&self, p: [f64; 3]) -> f64 {
        let mut base = [0usize; 3];
        let mut frac = [0.0; 3];
        for a in 0..3 {
            let t = (p[a] / self.spacing[a]).clamp(0.0, (self.dims[a] - 1) as f64);
            let i = (t.floor() as usize).min(self.dims[a].saturating_sub(2));
            base[a] = i;
            frac[a] = t - i as f64;
        }
        let mut acc = 0.0;
        for corner in 0..8 {
            let o = [corner & 1, (corner >> 1) & 1, corner >> 2];
            let mut w = 1.0;
            for a in 0..3 {
                w *= if o[a] == 1 { frac[a] } else { 1.0 - frac[a] };
            }
            if w != 0.0 {
                acc += w * self.at(base[0] + o[0], base[1] + o[1], base[2] + o[2]);
            }
        }
        acc
    }
}

/// Samples `F(x, y, z) - c` on a `mesh_points³` lattice spanning `[0, L]` per axis.
pub fn sample_level_set(spec: &TpmsSpec) -> Result<ScalarField> {
    spec.validate()?;
    let n = spec.mesh_points;
    let spacing = spec.lengths.map(|l| l / (n - 1) as f64);
    let mut values = Vec::with_capacity(n * n * n);
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                values.push(spec.eval(
                    i as f64 * spacing[0],
                    j as f64 * spacing[1],
                    k as f64 * spacing[2],
                ));
            }
        }
    }
    Ok(ScalarField {
        dims: [n; 3],
        spacing,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn analytic_point_values() {
        let unit = TpmsSpec::default();
        assert_eq!(unit.eval(0.0, 0.0, 0.0), 0.0);
        assert!((unit.eval(0.25, 0.0, 0.0) - 1.0).abs() < 1e-15);
        let shifted = TpmsSpec { c: 0.5, ..unit };
        assert_eq!(shifted.eval(0.0, 0.0, 0.0), -0.5);
    }

    #[test]
    fn sampled_grid_includes_both_faces() {
        let f = sample_level_set(&TpmsSpec {
            mesh_points: 5,
            ..Default::default()
        })
        .unwrap();
        assert_eq!(f.values.len(), 125);
        assert_eq!(f.point(4, 4, 4), [1.0, 1.0, 1.0]);
        // (0.25, 0, 0) is lattice point (1, 0, 0)
        assert!((f.at(1, 0, 0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn cyclic_permutation_symmetry() {
        let f = sample_level_set(&TpmsSpec {
            mesh_points: 11,
            ..Default::default()
        })
        .unwrap();
        for k in 0..11 {
            for j in 0..11 {
                for i in 0..11 {
                    assert!((f.at(i, j, k) - f.at(j, k, i)).abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn rejects_invalid_spec() {
        let bad = TpmsSpec {
            mesh_points: 1,
            ..Default::default()
        };
        assert!(sample_level_set(&bad).is_err());
        let bad = TpmsSpec {
            lengths: [1.0, 0.0, 1.0],
            ..Default::default()
        };
        assert!(sample_level_set(&bad).is_err());
    }
}
