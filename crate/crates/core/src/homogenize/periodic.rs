use super::element::NODE_OFFSETS;
use crate::error::{invalid, Result};

/// Identification of periodic images on the `(e_x+1)(e_y+1)(e_z+1)` node lattice.
///
/// Lattice node `(i, j, k)` is numbered `i + (e_x+1)(j + (e_y+1) k)`. Its master
/// is the image `(i mod e_x, j mod e_y, k mod e_z)`; masters are numbered
/// `0..e_x e_y e_z` in x-fastest order in the reduced system.
#[derive(Debug, Clone)]
pub struct PeriodicDofMap {
    resolution: [usize; 3],
    master: Vec<usize>,
    reduced: Vec<usize>,
}

impl PeriodicDofMap {
    pub fn new(resolution: [usize; 3]) -> Result<Self> {
        if resolution.iter().any(|&n| n == 0) {
            return Err(invalid(format!("resolution must be at least 1 per axis, got {resolution:?}")));
        }
        let [ex, ey, ez] = resolution;
        let lattice = |i: usize, j: usize, k: usize| i + (ex + 1) * (j + (ey + 1) * k);
        let count = (ex + 1) * (ey + 1) * (ez + 1);
        let mut master = vec![0; count];
        let mut reduced = vec![0; count];
        for k in 0..=ez {
            for j in 0..=ey {
                for i in 0..=ex {
                    let (mi, mj, mk) = (i % ex, j % ey, k % ez);
                    master[lattice(i, j, k)] = lattice(mi, mj, mk);
                    reduced[lattice(i, j, k)] = mi + ex * (mj + ey * mk);
                }
            }
        }
        Ok(Self {
            resolution,
            master,
            reduced,
        })
    }

    pub fn resolution(&self) -> [usize; 3] {
        self.resolution
    }

    pub fn lattice_nodes(&self) -> usize {
        self.master.len()
    }

    /// Lattice index of the master image of `node`.
    pub fn master_of(&self, node: usize) -> usize {
        self.master[node]
    }

    /// Reduced (periodic) node number of a lattice node.
    pub fn reduced_node(&self, node: usize) -> usize {
        self.reduced[node]
    }

    pub fn n_nodes(&self) -> usize {
        self.resolution.iter().product()
    }

    /// Number of unknowns of the reduced system.
    pub fn n_free(&self) -> usize {
        3 * self.n_nodes()
    }

    /// Reduced node numbers of the eight corners of voxel `(i, j, k)`.
    pub fn element_nodes(&self, i: usize, j: usize, k: usize) -> [usize; 8] {
        let [ex, ey, ez] = self.resolution;
        NODE_OFFSETS.map(|o| {
            let (a, b, c) = ((i + o[0]) % ex, (j + o[1]) % ey, (k + o[2]) % ez);
            a + ex * (b + ey * c)
        })
    }
}
