use nalgebra::{SMatrix, SVector};

use crate::error::{invalid, Result};

pub type Matrix24 = SMatrix<f64, 24, 24>;
pub type Matrix24x6 = SMatrix<f64, 24, 6>;
pub type Matrix6 = SMatrix<f64, 6, 6>;

/// Local node offsets of the trilinear brick, in units of the element size.
pub const NODE_OFFSETS: [[usize; 3]; 8] = [
    [0, 0, 0],
    [1, 0, 0],
    [1, 1, 0],
    [0, 1, 0],
    [0, 0, 1],
    [1, 0, 1],
    [1, 1, 1],
    [0, 1, 1],
];

/// Isotropic constitutive matrix for Young's modulus `e`, Voigt order
/// (11, 22, 33, 12, 23, 31) with engineering shear strains.
pub fn isotropic_stiffness(e: f64, nu: f64) -> Matrix6 {
    let f = e / ((1.0 + nu) * (1.0 - 2.0 * nu));
    let mut c = Matrix6::zeros();
    for i in 0..3 {
        for j in 0..3 {
            c[(i, j)] = if i == j { f * (1.0 - nu) } else { f * nu };
        }
        c[(i + 3, i + 3)] = e / (2.0 * (1.0 + nu));
    }
    c
}

/// Unit-modulus stiffness of one voxel element plus the nodal displacements
/// produced by the six unit test strains.
#[derive(Debug, Clone)]
pub struct ElementModel {
    pub nu: f64,
    pub size: [f64; 3],
    /// `k_0`, 24×24, dofs ordered node-major (`3 * node + component`).
    pub k0: Matrix24,
    /// Column `a` holds the affine field of unit strain `a` at the 8 nodes.
    pub u0: Matrix24x6,
    /// `k_0 · u0`, the element load for each test strain at unit modulus.
    pub k0_u0: Matrix24x6,
}

impl ElementModel {
    pub fn volume(&self) -> f64 {
        self.size.iter().product()
    }
}

/// Builds the trilinear hexahedron by 2×2×2 Gauss quadrature (exact for a brick).
pub fn element_stiffness(nu: f64, size: [f64; 3]) -> Result<ElementModel> {
    if !(0.0..0.5).contains(&nu) {
        return Err(invalid(format!("Poisson ratio must lie in [0, 0.5), got {nu}")));
    }
    if size.iter().any(|&h| !(h > 0.0) || !h.is_finite()) {
        return Err(invalid(format!("element sizes must be positive, got {size:?}")));
    }
    let c = isotropic_stiffness(1.0, nu);
    let g = 1.0 / 3f64.sqrt();
    let mut k0 = Matrix24::zeros();
    for &xi in &[-g, g] {
        for &eta in &[-g, g] {
            for &zeta in &[-g, g] {
                let b = strain_displacement(size, [xi, eta, zeta]);
                // Jacobian of the brick map is diag(h/2); weights are all 1.
                let det_j = size[0] * size[1] * size[2] / 8.0;
                k0 += b.transpose() * c * b * det_j;
            }
        }
    }
    let k0 = (k0 + k0.transpose()) * 0.5;

    let mut u0 = Matrix24x6::zeros();
    for (n, off) in NODE_OFFSETS.iter().enumerate() {
        let x = [
            off[0] as f64 * size[0],
            off[1] as f64 * size[1],
            off[2] as f64 * size[2],
        ];
        for case in 0..6 {
            let d = affine_displacement(case, x);
            for comp in 0..3 {
                u0[(3 * n + comp, case)] = d[comp];
            }
        }
    }
    let k0_u0 = k0 * u0;
    Ok(ElementModel {
        nu,
        size,
        k0,
        u0,
        k0_u0,
    })
}

/// Displacement `ε̄ · x` for unit test strain `case` (engineering shears split
/// symmetrically between the two components).
pub fn affine_displacement(case: usize, x: [f64; 3]) -> [f64; 3] {
    match case {
        0 => [x[0], 0.0, 0.0],
        1 => [0.0, x[1], 0.0],
        2 => [0.0, 0.0, x[2]],
        3 => [0.5 * x[1], 0.5 * x[0], 0.0],
        4 => [0.0, 0.5 * x[2], 0.5 * x[1]],
        5 => [0.5 * x[2], 0.0, 0.5 * x[0]],
        _ => panic!("test strain index {case} out of range"),
    }
}

/// Strain-displacement matrix at a point of the reference cube `[-1, 1]³`.
pub(crate) fn strain_displacement(size: [f64; 3], at: [f64; 3]) -> SMatrix<f64, 6, 24> {
    let mut b = SMatrix::<f64, 6, 24>::zeros();
    for (n, off) in NODE_OFFSETS.iter().enumerate() {
        let s = off.map(|o| if o == 1 { 1.0 } else { -1.0 });
        let f = [
            0.125 * (1.0 + s[0] * at[0]),
            0.125 * (1.0 + s[1] * at[1]),
            0.125 * (1.0 + s[2] * at[2]),
        ];
        // dN/dξ scaled to physical coordinates (dξ/dx = 2/h)
        let grad = SVector::<f64, 3>::new(
            s[0] * 8.0 * f[1] * f[2] * 2.0 / size[0],
            s[1] * 8.0 * f[0] * f[2] * 2.0 / size[1],
            s[2] * 8.0 * f[0] * f[1] * 2.0 / size[2],
        );
        let c = 3 * n;
        b[(0, c)] = grad[0];
        b[(1, c + 1)] = grad[1];
        b[(2, c + 2)] = grad[2];
        b[(3, c)] = grad[1];
        b[(3, c + 1)] = grad[0];
        b[(4, c + 1)] = grad[2];
        b[(4, c + 2)] = grad[1];
        b[(5, c)] = grad[2];
        b[(5, c + 2)] = grad[0];
    }
    b
}
