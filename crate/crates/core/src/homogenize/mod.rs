//! Energy-based periodic homogenization of voxel unit cells.
//!
//! Each voxel is a trilinear brick with modulus `E(ρ)` from the SIMP law. For
//! every unit test strain the periodic fluctuation `χ` solves `K χ = Σ_e k_e u0`,
//! and the effective stiffness follows from element mutual energies:
//! `E^H_ab = (1/|Y|) Σ_e E_e (u0 − χ_e)_aᵀ k0 (u0 − χ_e)_b`.

mod element;
mod material;
mod periodic;
mod solver;
mod tensor;

use rayon::prelude::*;

pub use element::{affine_displacement, element_stiffness, isotropic_stiffness, ElementModel, Matrix24, Matrix24x6, Matrix6, NODE_OFFSETS};
pub use material::MaterialModel;
pub use periodic::PeriodicDofMap;
pub use solver::{CellOperator, Preconditioner, SolveStats, SolverOptions, DEFAULT_TOLERANCE};
pub use tensor::{ElasticityTensor6, Objective, TensorJson, VOIGT_ORDER};

use crate::error::{invalid, Result};
use crate::grid::DensityGrid;

/// Output of one homogenization.
#[derive(Debug, Clone)]
pub struct HomogenizationResult {
    pub tensor: ElasticityTensor6,
    /// Periodic fluctuation `χ` per test strain on the reduced node numbering
    /// (`3 * node + component`, node 0 fixed). The full field of case `a` on an
    /// element is `u0[:, a] − χ_e`.
    pub displacement_fields: Vec<Vec<f64>>,
    /// `|Y|`, cm³.
    pub cell_volume: f64,
    /// Per-element mutual energies `Q_e = (u0 − χ_e)ᵀ k0 (u0 − χ_e)` at unit modulus.
    pub element_energies: Vec<Matrix6>,
    pub solve_stats: Vec<SolveStats>,
}

impl HomogenizationResult {
    /// `dF/dρ_e` for the objective `Σ w_ab E_ab`, given the densities used.
    pub fn sensitivities(&self, objective: Objective, material: &MaterialModel, densities: &[f64]) -> Vec<f64> {
        let w = objective.weights();
        self.element_energies
            .iter()
            .zip(densities)
            .map(|(q, &rho)| material.modulus_derivative(rho) * q.component_mul(&w).sum() / self.cell_volume)
            .collect()
    }
}

/// Reusable homogenization context for one grid shape. Keeps the previous
/// fluctuation fields as warm starts for the next call.
#[derive(Debug, Clone)]
pub struct Homogenizer {
    material: MaterialModel,
    element: ElementModel,
    map: PeriodicDofMap,
    cell_lengths: [f64; 3],
    options: SolverOptions,
    warm_start: Option<Vec<Vec<f64>>>,
}

impl Homogenizer {
    pub fn new(resolution: [usize; 3], cell_lengths: [f64; 3], material: MaterialModel, options: SolverOptions) -> Result<Self> {
        material.validate()?;
        let map = PeriodicDofMap::new(resolution)?;
        let size = [0, 1, 2].map(|a| cell_lengths[a] / resolution[a] as f64);
        let element = element_stiffness(material.nu, size)?;
        Ok(Self {
            material,
            element,
            map,
            cell_lengths,
            options,
            warm_start: None,
        })
    }

    pub fn for_grid(grid: &DensityGrid, material: MaterialModel, options: SolverOptions) -> Result<Self> {
        Self::new(grid.resolution(), grid.cell_lengths(), material, options)
    }

    pub fn material(&self) -> &MaterialModel {
        &self.material
    }

    pub fn element(&self) -> &ElementModel {
        &self.element
    }

    pub fn map(&self) -> &PeriodicDofMap {
        &self.map
    }

    pub fn options(&self) -> SolverOptions {
        self.options
    }

    /// Drops the stored warm start so the next solve begins from zero.
    pub fn reset(&mut self) {
        self.warm_start = None;
    }

    /// Homogenizes the densities (x-fastest, one per voxel).
    pub fn evaluate(&mut self, densities: &[f64]) -> Result<HomogenizationResult> {
        let n = self.map.n_nodes();
        if densities.len() != n {
            return Err(invalid(format!("expected {n} densities, got {}", densities.len())));
        }
        if let Some(bad) = densities.iter().find(|d| !(0.0..=1.0).contains(*d)) {
            return Err(invalid(format!("density {bad} outside [0, 1]")));
        }
        let moduli: Vec<f64> = densities.iter().map(|&r| self.material.modulus(r)).collect();
        let op = CellOperator::assemble(self.map.resolution(), &self.element.k0, &moduli, self.options);
        let warm = self.warm_start.take();

        let solved: Vec<(Vec<f64>, SolveStats)> = (0..6)
            .into_par_iter()
            .map(|case| {
                let f = self.load_vector(&moduli, case);
                let mut x = match &warm {
                    Some(w) => w[case].clone(),
                    None => vec![0.0; f.len()],
                };
                // a homogeneous cell assembles to a load that cancels to round-off
                let scale = moduli.iter().sum::<f64>() * self.element.k0_u0.column(case).norm();
                if solver::norm(&f) <= 1e-13 * scale {
                    x.iter_mut().for_each(|v| *v = 0.0);
                    return Ok((x, SolveStats { iterations: 0, relative_residual: 0.0 }));
                }
                let stats = op.solve(&f, &mut x)?;
                Ok((x, stats))
            })
            .collect::<Result<_>>()?;
        let (fields, stats): (Vec<_>, Vec<_>) = solved.into_iter().unzip();

        let cell_volume: f64 = self.cell_lengths.iter().product();
        let element_energies = self.element_energies(&fields);
        let mut sum = Matrix6::zeros();
        for (q, &e) in element_energies.iter().zip(&moduli) {
            sum += q * e;
        }
        let tensor = sum / cell_volume;
        self.warm_start = Some(fields.clone());
        Ok(HomogenizationResult {
            tensor: ElasticityTensor6(tensor),
            displacement_fields: fields,
            cell_volume,
            element_energies,
            solve_stats: stats,
        })
    }

    fn load_vector(&self, moduli: &[f64], case: usize) -> Vec<f64> {
        let [ex, ey, ez] = self.map.resolution();
        let col = self.element.k0_u0.column(case);
        let mut f = vec![0.0; self.map.n_free()];
        for k in 0..ez {
            for j in 0..ey {
                for i in 0..ex {
                    let e = i + ex * (j + ey * k);
                    let nodes = self.map.element_nodes(i, j, k);
                    for (a, &node) in nodes.iter().enumerate() {
                        for c in 0..3 {
                            f[3 * node + c] += moduli[e] * col[3 * a + c];
                        }
                    }
                }
            }
        }
        f
    }

    fn element_energies(&self, fields: &[Vec<f64>]) -> Vec<Matrix6> {
        let [ex, ey, ez] = self.map.resolution();
        let mut out = Vec::with_capacity(ex * ey * ez);
        for k in 0..ez {
            for j in 0..ey {
                for i in 0..ex {
                    let nodes = self.map.element_nodes(i, j, k);
                    let mut u = self.element.u0;
                    for (case, chi) in fields.iter().enumerate() {
                        for (a, &node) in nodes.iter().enumerate() {
                            for c in 0..3 {
                                u[(3 * a + c, case)] -= chi[3 * node + c];
                            }
                        }
                    }
                    let ku = self.element.k0 * u;
                    out.push(u.transpose() * ku);
                }
            }
        }
        out
    }
}

/// Fluctuation field of one test strain (`case` in `0..6`, Voigt order).
pub fn solve_load_case(grid: &DensityGrid, material: &MaterialModel, options: SolverOptions, case: usize) -> Result<Vec<f64>> {
    if case >= 6 {
        return Err(invalid(format!("test strain index {case} out of range 0..6")));
    }
    let h = Homogenizer::for_grid(grid, *material, options)?;
    let moduli: Vec<f64> = grid.densities().iter().map(|&r| material.modulus(r)).collect();
    let op = CellOperator::assemble(grid.resolution(), &h.element.k0, &moduli, options);
    let f = h.load_vector(&moduli, case);
    let mut x = vec![0.0; f.len()];
    let scale = moduli.iter().sum::<f64>() * h.element.k0_u0.column(case).norm();
    if solver::norm(&f) > 1e-13 * scale {
        op.solve(&f, &mut x)?;
    }
    Ok(x)
}

/// One-shot homogenization with default solver options.
pub fn homogenized_tensor(grid: &DensityGrid, material: &MaterialModel) -> Result<HomogenizationResult> {
    Homogenizer::for_grid(grid, *material, SolverOptions::default())?.evaluate(grid.densities())
}

pub fn bulk_objective(t: &ElasticityTensor6) -> f64 {
    t.bulk_objective()
}

pub fn shear_objective(t: &ElasticityTensor6) -> f64 {
    t.shear_objective()
}
