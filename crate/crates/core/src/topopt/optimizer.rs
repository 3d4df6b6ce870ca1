use std::path::Path;

use serde::{Deserialize, Serialize};

use super::filter::{build_filter, build_filter_with, FilterKernel, FilterOperator};
use super::oc::oc_update;
use super::projection::{heaviside_derivative, heaviside_project, project};
use crate::error::{invalid, Error, Result};
use crate::grid::DensityGrid;
use crate::homogenize::{Homogenizer, MaterialModel, Objective, SolverOptions};

/// Void voxels of the initial Gyroid are lifted to this density so the
/// multiplicative update can still grow them.
pub const INITIAL_VOID_DENSITY: f64 = 0.01;
/// Cap on how far the move limit is widened when the volume target cannot be
/// reached from the current design.
const MAX_MOVE_LIMIT: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContinuationSchedule {
    pub beta_initial: f64,
    pub beta_max: f64,
    /// β doubles after this many iterations at the same value...
    pub double_every: usize,
    /// ...or as soon as the design change drops below this.
    pub change_threshold: f64,
}

impl Default for ContinuationSchedule {
    fn default() -> Self {
        Self {
            beta_initial: 1.0,
            beta_max: 512.0,
            double_every: 50,
            change_threshold: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopOptConfig {
    pub objective: Objective,
    pub vf: f64,
    pub rmin: f64,
    pub kernel: FilterKernel,
    pub material: MaterialModel,
    pub schedule: ContinuationSchedule,
    pub max_iterations: usize,
    pub change_tolerance: f64,
    pub move_limit: f64,
    pub resolution: [usize; 3],
    pub solver: SolverOptions,
}

impl TopOptConfig {
    pub fn new(objective: Objective, vf: f64, rmin: f64, resolution: [usize; 3]) -> Self {
        Self {
            objective,
            vf,
            rmin,
            kernel: FilterKernel::default(),
            material: MaterialModel::default(),
            schedule: ContinuationSchedule::default(),
            max_iterations: 1000,
            change_tolerance: 0.01,
            move_limit: 0.2,
            resolution,
            solver: SolverOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.vf > 0.0 && self.vf < 1.0) {
            return Err(invalid(format!("volume fraction must lie in (0, 1), got {}", self.vf)));
        }
        if !(self.rmin >= 1.0) || !self.rmin.is_finite() {
            return Err(invalid(format!("filter radius must be >= 1 element, got {}", self.rmin)));
        }
        if self.max_iterations == 0 {
            return Err(invalid("max_iterations must be at least 1"));
        }
        if !(self.move_limit > 0.0 && self.move_limit <= 1.0) {
            return Err(invalid(format!("move limit must lie in (0, 1], got {}", self.move_limit)));
        }
        let s = &self.schedule;
        if !(s.beta_initial >= 0.0 && s.beta_initial <= s.beta_max) || s.double_every == 0 {
            return Err(invalid(format!("bad continuation schedule {s:?}")));
        }
        self.material.validate()
    }
}

/// Design variables and the two derived density fields.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignState {
    pub eta: Vec<f64>,
    pub rho: Vec<f64>,
    pub rho_h: Vec<f64>,
    pub beta: f64,
    pub iteration: usize,
}

impl DesignState {
    pub fn new(eta: Vec<f64>, filter: &FilterOperator, beta: f64) -> Self {
        let rho = filter.apply(&eta);
        let rho_h = heaviside_project(&rho, beta);
        Self {
            eta,
            rho,
            rho_h,
            beta,
            iteration: 0,
        }
    }

    pub fn physical_volume(&self) -> f64 {
        self.rho_h.iter().sum::<f64>() / self.rho_h.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub objective: f64,
    pub volume: f64,
    pub change: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationResult {
    pub config: TopOptConfig,
    /// Physical densities `ρ^H` of the final design.
    pub final_grid: DensityGrid,
    pub objective_value: f64,
    pub achieved_volume: f64,
    pub converged: bool,
    pub iterations_used: usize,
    pub trace: Vec<TraceEntry>,
}

/// JSON companion of a result `dgrid`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultSidecar {
    pub objective_id: u8,
    pub vf: f64,
    pub rmin: f64,
    pub objective_value: f64,
    pub achieved_volume: f64,
    pub converged: bool,
    pub iterations: usize,
    pub trace: Vec<TraceEntry>,
}

impl OptimizationResult {
    pub fn sidecar(&self) -> ResultSidecar {
        ResultSidecar {
            objective_id: self.config.objective.id(),
            vf: self.config.vf,
            rmin: self.config.rmin,
            objective_value: self.objective_value,
            achieved_volume: self.achieved_volume,
            converged: self.converged,
            iterations: self.iterations_used,
            trace: self.trace.clone(),
        }
    }

    /// Writes `<stem>.dgrid` and `<stem>.json`.
    pub fn save(&self, stem: impl AsRef<Path>) -> Result<()> {
        let stem = stem.as_ref();
        self.final_grid.save(stem.with_extension("dgrid"))?;
        let json = serde_json::to_string_pretty(&self.sidecar())?;
        std::fs::write(stem.with_extension("json"), json + "\n")?;
        Ok(())
    }
}

/// Objective and its design sensitivities at the current state.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub objective: f64,
    pub volume: f64,
    pub d_objective: Vec<f64>,
    pub d_volume: Vec<f64>,
}

/// Homogenizes `ρ^H` and chains the adjoint sensitivities back to `η`:
/// `dF/dη = W̄ᵀ(H' ⊙ dF/dρ^H)`, `dV/dη = W̄ᵀ H' / N`.
pub fn objective_and_sensitivities(
    state: &DesignState,
    objective: Objective,
    filter: &FilterOperator,
    homogenizer: &mut Homogenizer,
) -> Result<Evaluation> {
    let hom = homogenizer.evaluate(&state.rho_h)?;
    let value = objective.evaluate(&hom.tensor);
    let df_drho_h = hom.sensitivities(objective, homogenizer.material(), &state.rho_h);
    let dh = heaviside_derivative(&state.rho, state.beta);
    let n = state.eta.len() as f64;
    let chained: Vec<f64> = df_drho_h.iter().zip(&dh).map(|(a, b)| a * b).collect();
    let dv: Vec<f64> = dh.iter().map(|d| d / n).collect();
    Ok(Evaluation {
        objective: value,
        volume: state.physical_volume(),
        d_objective: filter.apply_transpose(&chained),
        d_volume: filter.apply_transpose(&dv),
    })
}

/// Fraction of voxels with density strictly inside (0.05, 0.95).
pub fn binarization_fraction(grid: &DensityGrid) -> f64 {
    let d = grid.densities();
    d.iter().filter(|&&v| v > 0.05 && v < 0.95).count() as f64 / d.len() as f64
}

/// Radius of the smoothing used to rank solid voxels by depth when thinning
/// the start design.
const THINNING_RADIUS: f64 = 2.5;

/// Initial design variables from a (near) binary start grid.
///
/// Void voxels are lifted to [`INITIAL_VOID_DENSITY`]. If the projected volume
/// at the initial β exceeds the target, the solid is thinned: solid voxels
/// are ranked by a smoothed copy of the grid (voxels deep inside the walls
/// rank first) and only the deepest are kept, so the start stays binary and
/// keeps its topology. A final uniform scale `s ≤ 1` closes the residual gap
/// so the start is exactly feasible.
pub fn initial_design(initial: &DensityGrid, config: &TopOptConfig, filter: &FilterOperator) -> Vec<f64> {
    let beta = config.schedule.beta_initial;
    let volume = |eta: &[f64]| {
        let rho = filter.apply(eta);
        rho.iter().map(|&r| project(r, beta)).sum::<f64>() / rho.len() as f64
    };
    let lifted: Vec<f64> = initial.densities().iter().map(|&d| d.max(INITIAL_VOID_DENSITY)).collect();
    if volume(&lifted) <= config.vf {
        return lifted;
    }

    let depth = match build_filter(initial.resolution(), THINNING_RADIUS) {
        Ok(smooth) => smooth.apply(initial.densities()),
        Err(_) => initial.densities().to_vec(),
    };
    let mut solids: Vec<usize> = (0..lifted.len()).filter(|&i| initial.densities()[i] >= 0.5).collect();
    solids.sort_by(|&a, &b| depth[b].total_cmp(&depth[a]).then(a.cmp(&b)));
    let keep = |k: usize| {
        let mut eta = vec![INITIAL_VOID_DENSITY; lifted.len()];
        for &i in &solids[..k] {
            eta[i] = 1.0;
        }
        eta
    };
    // smallest k whose binary design still meets the target
    let (mut lo, mut hi) = (0, solids.len());
    while lo < hi {
        let mid = (lo + hi) / 2;
        if volume(&keep(mid)) >= config.vf {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    let thinned = keep(lo);
    if volume(&thinned) <= config.vf {
        return thinned;
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        let scaled: Vec<f64> = thinned.iter().map(|d| d * mid).collect();
        if volume(&scaled) > config.vf {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let s = 0.5 * (lo + hi);
    thinned.iter().map(|d| d * s).collect()
}

/// SIMP optimization with density filter, Heaviside projection and
/// β-continuation, starting from `initial`.
pub fn optimize(config: &TopOptConfig, initial: &DensityGrid) -> Result<OptimizationResult> {
    config.validate()?;
    if initial.resolution() != config.resolution {
        return Err(Error::ShapeMismatch(format!(
            "initial grid is {:?}, config expects {:?}",
            initial.resolution(),
            config.resolution
        )));
    }
    let filter = build_filter_with(config.resolution, config.rmin, config.kernel)?;
    let mut homogenizer = Homogenizer::for_grid(initial, config.material, config.solver)?;
    let schedule = config.schedule;

    let mut state = DesignState::new(initial_design(initial, config, &filter), &filter, schedule.beta_initial);
    let mut trace = Vec::new();
    let mut converged = false;
    let mut since_beta_change = 0;

    while state.iteration < config.max_iterations {
        state.iteration += 1;
        since_beta_change += 1;
        let eval = objective_and_sensitivities(&state, config.objective, &filter, &mut homogenizer)?;

        let mut move_limit = config.move_limit;
        let next = loop {
            match oc_update(&state.eta, &eval.d_objective, &eval.d_volume, config.vf, move_limit, &filter, state.beta) {
                Ok(next) => break next,
                Err(Error::BisectionFailed { .. }) if move_limit < MAX_MOVE_LIMIT => {
                    move_limit = (2.0 * move_limit).min(MAX_MOVE_LIMIT);
                    log::debug!("iteration {}: widening move limit to {move_limit}", state.iteration);
                }
                Err(e) => return Err(e),
            }
        };
        let change = next.iter().zip(&state.eta).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);

        trace.push(TraceEntry {
            iteration: state.iteration,
            objective: eval.objective,
            volume: eval.volume,
            change,
            beta: state.beta,
        });
        log::trace!(
            "it {:4} obj {:.6} vol {:.4} ch {:.4} beta {}",
            state.iteration,
            eval.objective,
            eval.volume,
            change,
            state.beta
        );

        let beta = state.beta;
        let iteration = state.iteration;
        state = DesignState::new(next, &filter, beta);
        state.iteration = iteration;

        if state.beta >= schedule.beta_max && change < config.change_tolerance {
            converged = true;
            break;
        }
        if state.beta < schedule.beta_max
            && (since_beta_change >= schedule.double_every || change < schedule.change_threshold)
        {
            let beta = (2.0 * state.beta).max(1.0).min(schedule.beta_max);
            state = DesignState::new(state.eta, &filter, beta);
            state.iteration = iteration;
            since_beta_change = 0;
        }
    }

    // report the objective of the design actually returned
    let final_hom = homogenizer.evaluate(&state.rho_h)?;
    let final_grid = initial.with_densities(state.rho_h.clone())?;
    Ok(OptimizationResult {
        config: config.clone(),
        objective_value: config.objective.evaluate(&final_hom.tensor),
        achieved_volume: final_grid.relative_density(),
        final_grid,
        converged,
        iterations_used: state.iteration,
        trace,
    })
}
