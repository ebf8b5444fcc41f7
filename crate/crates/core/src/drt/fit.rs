use serde::{Deserialize, Serialize};

use super::lcurve::{lcurve_select_detailed, LCurvePoint};
use super::nnls::solve_nnls_tikhonov;
use crate::eis::{
    build_kernel_real, imag_matrix, DrtSolution, ImpedanceSpectrum, KernelMatrix,
    TimeConstantGrid,
};
use crate::error::{Error, Result};

/// Which part of the spectrum enters the fit.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMode {
    /// Real part only.
    #[default]
    Real,
    /// Real and imaginary parts stacked. Available but untuned.
    Complex,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    /// Fixed λ; `None` selects it on the L-curve.
    pub lambda: Option<f64>,
    pub mode: FitMode,
    /// L-curve grid in units of `trace(AᵀA)/n`.
    pub lambda_multipliers: Vec<f64>,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            lambda: None,
            mode: FitMode::Real,
            lambda_multipliers: default_lambda_grid(),
        }
    }
}

/// 25 points log-spaced over `[1e-8, 1e2]`.
pub fn default_lambda_grid() -> Vec<f64> {
    log_grid(1e-8, 1e2, 25)
}

pub(crate) fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.log10(), hi.log10());
    (0..n)
        .map(|k| 10f64.powf(a + (b - a) * k as f64 / (n - 1) as f64))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DrtFit {
    pub solution: DrtSolution,
    /// Present when λ came from the L-curve.
    pub lcurve: Option<Vec<LCurvePoint>>,
}

/// Fit a DRT to `spectrum` on `tg`, using the real part and an L-curve λ
/// unless `lambda` is given.
pub fn fit_drt(
    spectrum: &ImpedanceSpectrum,
    tg: &TimeConstantGrid,
    lambda: Option<f64>,
) -> Result<DrtSolution> {
    let opts = FitOptions {
        lambda,
        ..FitOptions::default()
    };
    Ok(fit_drt_with(spectrum, tg, &opts)?.solution)
}

pub fn fit_drt_with(
    spectrum: &ImpedanceSpectrum,
    tg: &TimeConstantGrid,
    opts: &FitOptions,
) -> Result<DrtFit> {
    let (kernel, z) = assemble(spectrum, tg, opts.mode)?;

    let (lambda, lcurve) = match opts.lambda {
        Some(l) => {
            if !(l.is_finite() && l > 0.0) {
                return Err(Error::arg(format!("lambda must be positive, got {l}")));
            }
            (l, None)
        }
        None => {
            let unit = penalized_trace_scale(&kernel);
            let grid: Vec<f64> = opts.lambda_multipliers.iter().map(|m| m * unit).collect();
            let sel = lcurve_select_detailed(&kernel, &z, &grid)?;
            (sel.lambda_star, Some(sel.points))
        }
    };

    let (x, report) = solve_nnls_tikhonov(&kernel, &z, lambda)?;
    let mut solution = DrtSolution::new(tg.clone(), x[1..].to_vec(), x[0])?;
    solution.lambda = Some(lambda);
    solution.report = Some(report);
    Ok(DrtFit { solution, lcurve })
}

/// `trace(AᵀA)/n` of the kernel `fit_drt_with` would build; the unit of the
/// default λ grid.
pub fn lambda_scale(spectrum: &ImpedanceSpectrum, tg: &TimeConstantGrid, mode: FitMode) -> Result<f64> {
    let (kernel, _) = assemble(spectrum, tg, mode)?;
    Ok(penalized_trace_scale(&kernel))
}

/// Kernel (unit quadrature weights, leading R0 column) and data vector.
pub(crate) fn assemble(
    spectrum: &ImpedanceSpectrum,
    tg: &TimeConstantGrid,
    mode: FitMode,
) -> Result<(KernelMatrix, Vec<f64>)> {
    let unit = tg.with_unit_weights();
    let real = build_kernel_real(spectrum.freq_grid(), &unit, true);
    match mode {
        FitMode::Real => Ok((real, spectrum.z_real_ohm().to_vec())),
        FitMode::Complex => {
            let imag = imag_matrix(spectrum.freq_grid(), &unit, true);
            let kernel = KernelMatrix {
                matrix: real.matrix.vstack(&imag)?,
                includes_r0_column: true,
            };
            let mut z = spectrum.z_real_ohm().to_vec();
            z.extend_from_slice(spectrum.z_imag_ohm());
            Ok((kernel, z))
        }
    }
}

/// `trace(AᵀA)/n` over the regularized columns.
pub(crate) fn penalized_trace_scale(a: &KernelMatrix) -> f64 {
    let mask = a.penalty_mask();
    let mut total = 0.0;
    let mut count = 0usize;
    for (c, w) in mask.iter().enumerate() {
        if *w > 0.0 {
            total += (0..a.rows()).map(|r| a.matrix.get(r, c).powi(2)).sum::<f64>();
            count += 1;
        }
    }
    if count == 0 {
        1.0
    } else {
        total / count as f64
    }
}
