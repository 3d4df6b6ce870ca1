use std::fmt::Write as _;

use crate::error::{invalid, Result};
use crate::homogenize::{homogenized_tensor, MaterialModel};
use crate::tpms::{voxelized_gyroid, TpmsSpec, VoxelRule};

/// Voxel count per axis used by the isosurface-mesh study.
pub const MESH_STUDY_RESOLUTION: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StudyKind {
    /// Relative density of the 32³ voxelization versus marching-cubes sampling.
    Mesh,
    /// Homogenized bulk/shear objectives of the unoptimized Gyroid versus voxel count.
    Voxel,
}

impl std::str::FromStr for StudyKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "mesh" => Ok(StudyKind::Mesh),
            "voxel" => Ok(StudyKind::Voxel),
            other => Err(format!("unknown study kind '{other}' (expected mesh or voxel)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl StudyTable {
    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }
}

pub fn convergence_study(kind: StudyKind, levels: &[usize]) -> Result<StudyTable> {
    if levels.is_empty() {
        return Err(invalid("at least one level is required"));
    }
    match kind {
        StudyKind::Mesh => {
            let mut rows = Vec::new();
            for &m in levels {
                let spec = TpmsSpec {
                    mesh_points: m,
                    ..TpmsSpec::default()
                };
                let grid = voxelized_gyroid(&spec, [MESH_STUDY_RESOLUTION; 3], VoxelRule::default())?;
                rows.push(vec![m as f64, grid.relative_density()]);
            }
            Ok(StudyTable {
                header: vec!["mesh_points".into(), "relative_density".into()],
                rows,
            })
        }
        StudyKind::Voxel => {
            let mut rows = Vec::new();
            for &n in levels {
                let grid = voxelized_gyroid(&TpmsSpec::default(), [n; 3], VoxelRule::default())?;
                let t = homogenized_tensor(&grid, &MaterialModel::default())?.tensor;
                rows.push(vec![n as f64, grid.relative_density(), t.bulk_objective(), t.shear_objective()]);
            }
            Ok(StudyTable {
                header: vec!["resolution".into(), "relative_density".into(), "bulk".into(), "shear".into()],
                rows,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_level_gives_one_row() {
        let t = convergence_study(StudyKind::Voxel, &[8]).unwrap();
        assert_eq!(t.rows.len(), 1);
        let csv = t.to_csv();
        assert!(csv.starts_with("resolution,relative_density,bulk,shear\n"));
        assert_eq!(csv.lines().count(), 2);
    }

    #[test]
    fn empty_levels_rejected() {
        assert!(convergence_study(StudyKind::Mesh, &[]).is_err());
    }
}
