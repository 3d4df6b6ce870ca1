//! SIMP topology optimization of periodic unit cells: linear density filter,
//! Heaviside projection with β-continuation and an optimality-criteria update
//! on the homogenized bulk or shear modulus.

mod filter;
mod oc;
mod optimizer;
mod projection;

pub use crate::homogenize::Objective;
pub use filter::{build_filter, build_filter_with, FilterKernel, FilterOperator};
pub use oc::{oc_update, LAMBDA_BOUNDS, MAX_BISECTION_STEPS, SENSITIVITY_FLOOR, VOLUME_TOLERANCE};
pub use optimizer::{
    binarization_fraction, initial_design, objective_and_sensitivities, optimize, ContinuationSchedule, DesignState,
    Evaluation, OptimizationResult, ResultSidecar, TopOptConfig, TraceEntry, INITIAL_VOID_DENSITY,
};
pub use projection::{heaviside_derivative, heaviside_project, project, project_derivative};
