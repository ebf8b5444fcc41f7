//! Lawson–Hanson active-set NNLS applied to the λ-augmented system
//! `[A; √λ·D] g = [Z; 0]`.
//!
//! The augmented system is never materialized: its normal matrix is
//! `AᵀA + λD` and its right-hand side `AᵀZ`, so every passive-set
//! subproblem is a small SPD solve.

use super::ridge::regularized_normal_equations;
use super::SolverReport;
use crate::eis::KernelMatrix;
use crate::error::{Error, Result};
use crate::linalg::{norm_inf, Cholesky, Matrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NnlsOptions {
    /// Iteration cap; `None` means `10·n`.
    pub max_iterations: Option<usize>,
    /// KKT tolerance relative to `‖AᵀZ‖∞`.
    pub tolerance: f64,
}

impl Default for NnlsOptions {
    fn default() -> Self {
        NnlsOptions {
            max_iterations: None,
            tolerance: 1e-10,
        }
    }
}

/// `argmin_{g ≥ 0} ‖Ag − Z‖² + λ‖g‖²` (R0 column unpenalized).
pub fn solve_nnls_tikhonov(
    a: &KernelMatrix,
    z: &[f64],
    lambda: f64,
) -> Result<(Vec<f64>, SolverReport)> {
    solve_nnls_tikhonov_with(a, z, lambda, &NnlsOptions::default())
}

pub fn solve_nnls_tikhonov_with(
    a: &KernelMatrix,
    z: &[f64],
    lambda: f64,
    opts: &NnlsOptions,
) -> Result<(Vec<f64>, SolverReport)> {
    let (gram, h) = regularized_normal_equations(a, z, lambda)?;
    let n = gram.rows();
    let max_iter = opts.max_iterations.unwrap_or(10 * n);
    let scale = norm_inf(&h).max(f64::MIN_POSITIVE);
    let tol = opts.tolerance * scale;

    let mut x = vec![0.0; n];
    let mut passive = vec![false; n];
    // Indices whose entry into the passive set failed numerically; cleared
    // whenever the passive set changes for real.
    let mut blocked = vec![false; n];
    let mut w = h.clone();
    let mut iterations = 0;

    loop {
        let candidate = (0..n)
            .filter(|&j| !passive[j] && !blocked[j] && w[j] > tol)
            .fold(None, |best: Option<usize>, j| match best {
                Some(b) if w[b] >= w[j] => Some(b),
                _ => Some(j),
            });
        let Some(j) = candidate else { break };

        iterations += 1;
        if iterations > max_iter {
            let report = make_report(&gram, &h, &x, iterations - 1, scale, opts.tolerance);
            return Err(Error::NotConverged {
                report: SolverReport {
                    converged: false,
                    ..report
                },
            });
        }

        passive[j] = true;
        let mut first_pass = true;
        loop {
            let idx: Vec<usize> = (0..n).filter(|&i| passive[i]).collect();
            let s = solve_subproblem(&gram, &h, &idx)?;

            if first_pass {
                let pos = idx.iter().position(|&i| i == j).expect("j is passive");
                if s[pos] <= 0.0 {
                    // Entering column is numerically dependent on the
                    // passive set; skip it until the set changes.
                    passive[j] = false;
                    blocked[j] = true;
                    break;
                }
                blocked.iter_mut().for_each(|b| *b = false);
                first_pass = false;
            }

            if s.iter().all(|&v| v > 0.0) {
                for (k, &i) in idx.iter().enumerate() {
                    x[i] = s[k];
                }
                break;
            }

            // Step from x toward s until the first passive entry hits zero.
            let mut alpha = f64::INFINITY;
            let mut hit = idx[0];
            for (k, &i) in idx.iter().enumerate() {
                if s[k] <= 0.0 {
                    let t = x[i] / (x[i] - s[k]);
                    if t < alpha {
                        alpha = t;
                        hit = i;
                    }
                }
            }
            for (k, &i) in idx.iter().enumerate() {
                x[i] += alpha * (s[k] - x[i]);
            }
            x[hit] = 0.0;
            for &i in &idx {
                if x[i] <= 0.0 {
                    x[i] = 0.0;
                    passive[i] = false;
                }
            }
            iterations += 1;
            if iterations > max_iter {
                let report = make_report(&gram, &h, &x, iterations - 1, scale, opts.tolerance);
                return Err(Error::NotConverged {
                    report: SolverReport {
                        converged: false,
                        ..report
                    },
                });
            }
        }

        w = dual(&gram, &h, &x);
    }

    let report = make_report(&gram, &h, &x, iterations, scale, opts.tolerance);
    if !report.converged {
        return Err(Error::NotConverged { report });
    }
    Ok((x, report))
}

fn solve_subproblem(gram: &Matrix, h: &[f64], idx: &[usize]) -> Result<Vec<f64>> {
    let k = idx.len();
    let mut sub = Vec::with_capacity(k * k);
    for &r in idx {
        for &c in idx {
            sub.push(gram.get(r, c));
        }
    }
    let rhs: Vec<f64> = idx.iter().map(|&i| h[i]).collect();
    Ok(Cholesky::factor(k, &sub)?.solve(&rhs))
}

/// `AᵀZ − (AᵀA + λD) g`, the negative half-gradient of the objective.
fn dual(gram: &Matrix, h: &[f64], x: &[f64]) -> Vec<f64> {
    let gx = gram.matvec(x);
    h.iter().zip(gx).map(|(a, b)| a - b).collect()
}

fn make_report(
    gram: &Matrix,
    h: &[f64],
    x: &[f64],
    iterations: usize,
    scale: f64,
    tolerance: f64,
) -> SolverReport {
    let w = dual(gram, h, x);
    let violation = kkt_from_dual(x, &w) / scale;
    SolverReport {
        iterations,
        converged: violation <= tolerance,
        active_set_size: x.iter().filter(|&&v| v == 0.0).count(),
        final_kkt_violation: violation,
    }
}

fn kkt_from_dual(x: &[f64], w: &[f64]) -> f64 {
    x.iter()
        .zip(w)
        .map(|(&xi, &wi)| {
            let primal = (-xi).max(0.0);
            // gradient ∇ = −2w must be ≥ 0 everywhere and = 0 where x > 0
            let stationarity = if xi > 0.0 { wi.abs() } else { wi.max(0.0) };
            primal.max(stationarity)
        })
        .fold(0.0, f64::max)
}

/// Scaled KKT violation of `g` for `min_{g≥0} ‖Ag − Z‖² + λ‖g‖²`,
/// computed from scratch: max over entries of primal infeasibility,
/// dual infeasibility and stationarity on the support, divided by
/// `‖AᵀZ‖∞`.
pub fn kkt_violation(a: &KernelMatrix, z: &[f64], lambda: f64, g: &[f64]) -> Result<f64> {
    let (gram, h) = regularized_normal_equations(a, z, lambda)?;
    if g.len() != gram.rows() {
        return Err(Error::arg("solution length does not match kernel"));
    }
    let scale = norm_inf(&h).max(f64::MIN_POSITIVE);
    Ok(kkt_from_dual(g, &dual(&gram, &h, g)) / scale)
}
