//! Tikhonov-regularized, nonnegativity-constrained inversion of `A g = Z`
//! and L-curve selection of the regularization parameter.

mod fit;
mod lcurve;
mod nnls;
mod ridge;

use serde::{Deserialize, Serialize};

pub use fit::{default_lambda_grid, fit_drt, fit_drt_with, lambda_scale, DrtFit, FitMode, FitOptions};
pub use lcurve::{lcurve_select, lcurve_select_detailed, CornerMethod, LCurvePoint, LCurveSelection};
pub use nnls::{kkt_violation, solve_nnls_tikhonov, solve_nnls_tikhonov_with, NnlsOptions};
pub use ridge::{regularized_normal_equations, solve_ridge};

/// Diagnostics from one constrained solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub iterations: usize,
    pub converged: bool,
    /// Number of components held at the zero bound.
    pub active_set_size: usize,
    /// Largest KKT violation, scaled by `‖AᵀZ‖∞`.
    pub final_kkt_violation: f64,
}
