use std::collections::{BTreeSet, HashMap};

use super::level_set::ScalarField;
use super::tables::{EDGE_CORNERS, TRI_TABLE};
use crate::error::{Error, Result};

const CORNER_OFFSETS: [[usize; 3]; 8] = [
    [0, 0, 0],
    [1, 0, 0],
    [1, 1, 0],
    [0, 1, 0],
    [0, 0, 1],
    [1, 0, 1],
    [1, 1, 1],
    [0, 1, 1],
];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TriangleMesh {
    pub vertices: Vec<[f64; 3]>,
    pub triangles: Vec<[u32; 3]>,
}

impl TriangleMesh {
    /// Unique undirected edges `(a, b)` with `a < b`, in sorted order.
    pub fn edges(&self) -> Vec<[u32; 2]> {
        let mut set = BTreeSet::new();
        for t in &self.triangles {
            for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                set.insert([a.min(b), a.max(b)]);
            }
        }
        set.into_iter().collect()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }
}

/// Where a mesh vertex lives: on a lattice node (field exactly zero there) or
/// strictly inside a lattice edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum VertexKey {
    Node(usize),
    Edge(usize, usize),
}

/// Marching-cubes triangulation of the zero level set of `field`.
///
/// Vertices are shared between neighbouring cells, so the mesh is watertight
/// except where it meets the lattice boundary. Samples that are exactly zero
/// snap the vertex onto the node; triangles that collapse as a result are
/// dropped.
pub fn extract_isosurface(field: &ScalarField) -> Result<TriangleMesh> {
    let has_neg = field.values.iter().any(|&v| v < 0.0);
    let has_pos = field.values.iter().any(|&v| v > 0.0);
    if !(has_neg && has_pos) {
        return Err(Error::NoSurface);
    }

    let [nx, ny, nz] = field.dims;
    let mut mesh = TriangleMesh::default();
    let mut lookup: HashMap<VertexKey, u32> = HashMap::new();

    for k in 0..nz - 1 {
        for j in 0..ny - 1 {
            for i in 0..nx - 1 {
                let nodes = CORNER_OFFSETS.map(|o| field.index(i + o[0], j + o[1], k + o[2]));
                let values = nodes.map(|n| field.values[n]);
                let case = values
                    .iter()
                    .enumerate()
                    .filter(|(_, &v)| v < 0.0)
                    .fold(0usize, |acc, (c, _)| acc | (1 << c));
                let row = &TRI_TABLE[case];
                for tri in row.chunks_exact(3).take_while(|t| t[0] >= 0) {
                    let mut idx = [0u32; 3];
                    for (slot, &edge) in idx.iter_mut().zip(tri) {
                        let [ca, cb] = EDGE_CORNERS[edge as usize];
                        *slot = edge_vertex(field, &mut mesh, &mut lookup, nodes[ca], nodes[cb]);
                    }
                    if idx[0] != idx[1] && idx[1] != idx[2] && idx[0] != idx[2] {
                        mesh.triangles.push(idx);
                    }
                }
            }
        }
    }
    if mesh.triangles.is_empty() {
        return Err(Error::NoSurface);
    }
    Ok(mesh)
}

fn edge_vertex(
    field: &ScalarField,
    mesh: &mut TriangleMesh,
    lookup: &mut HashMap<VertexKey, u32>,
    a: usize,
    b: usize,
) -> u32 {
    let (va, vb) = (field.values[a], field.values[b]);
    let key = if va == 0.0 {
        VertexKey::Node(a)
    } else if vb == 0.0 {
        VertexKey::Node(b)
    } else {
        VertexKey::Edge(a.min(b), a.max(b))
    };
    *lookup.entry(key).or_insert_with(|| {
        let position = match key {
            VertexKey::Node(n) => node_point(field, n),
            VertexKey::Edge(lo, hi) => {
                let (vl, vh) = (field.values[lo], field.values[hi]);
                let t = vl / (vl - vh);
                let (pl, ph) = (node_point(field, lo), node_point(field, hi));
                [0, 1, 2].map(|d| pl[d] + t * (ph[d] - pl[d]))
            }
        };
        mesh.vertices.push(position);
        (mesh.vertices.len() - 1) as u32
    })
}

fn node_point(field: &ScalarField, n: usize) -> [f64; 3] {
    let [nx, ny, _] = field.dims;
    field.point(n % nx, (n / nx) % ny, n / (nx * ny))
}
