//! Frequency and relaxation-time grids, the discretized RC-superposition
//! forward operator, and the kernel matrices used by the inverse solver.
//!
//! The DRT vector `g` carries the quadrature weight and the polarization
//! resistance: `g_n` is the resistance (Ω) of the RC element with time
//! constant `τ_n`, so `Rp = Σ g_n` and the continuous density is recovered
//! as `g_n / δτ_n`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::drt::SolverReport;
use crate::error::{Error, Result};
use crate::linalg::Matrix;

pub const DEFAULT_N_TAU: usize = 81;
pub const DEFAULT_PAD_DECADES: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    freqs_hz: Vec<f64>,
}

impl FrequencyGrid {
    pub fn new(freqs_hz: Vec<f64>) -> Result<Self> {
        if freqs_hz.len() < 2 {
            return Err(Error::arg("frequency grid needs at least 2 points"));
        }
        if freqs_hz.iter().any(|f| !(f.is_finite() && *f > 0.0)) {
            return Err(Error::arg("frequencies must be finite and positive"));
        }
        let increasing = freqs_hz.windows(2).all(|w| w[1] > w[0]);
        let decreasing = freqs_hz.windows(2).all(|w| w[1] < w[0]);
        if !(increasing || decreasing) {
            return Err(Error::arg("frequencies must be strictly monotone"));
        }
        Ok(FrequencyGrid { freqs_hz })
    }

    /// `m` log-spaced points from `f_max` down to `f_min` (the order EIS
    /// instruments sweep in).
    pub fn log_spaced_descending(f_min_hz: f64, f_max_hz: f64, m: usize) -> Result<Self> {
        if !(f_min_hz > 0.0 && f_max_hz > f_min_hz) || m < 2 {
            return Err(Error::arg(format!(
                "invalid frequency window [{f_min_hz}, {f_max_hz}] with {m} points"
            )));
        }
        let hi = f_max_hz.log10();
        let lo = f_min_hz.log10();
        let step = (hi - lo) / (m - 1) as f64;
        let freqs = (0..m)
            .map(|k| {
                if k == 0 {
                    f_max_hz
                } else if k == m - 1 {
                    f_min_hz
                } else {
                    10f64.powf(hi - step * k as f64)
                }
            })
            .collect();
        FrequencyGrid::new(freqs)
    }

    pub fn freqs_hz(&self) -> &[f64] {
        &self.freqs_hz
    }

    /// ω = 2πf in rad/s.
    pub fn angular(&self) -> Vec<f64> {
        self.freqs_hz.iter().map(|f| 2.0 * PI * f).collect()
    }

    pub fn len(&self) -> usize {
        self.freqs_hz.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs_hz.is_empty()
    }

    pub fn min_hz(&self) -> f64 {
        self.freqs_hz.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_hz(&self) -> f64 {
        self.freqs_hz.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeConstantGrid {
    taus_s: Vec<f64>,
    dtaus_s: Vec<f64>,
}

impl TimeConstantGrid {
    pub fn new(taus_s: Vec<f64>, dtaus_s: Vec<f64>) -> Result<Self> {
        if taus_s.is_empty() || taus_s.len() != dtaus_s.len() {
            return Err(Error::arg("tau grid and widths must be nonempty and equal length"));
        }
        if taus_s.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(Error::arg("time constants must be finite and positive"));
        }
        if !taus_s.windows(2).all(|w| w[1] > w[0]) {
            return Err(Error::arg("time constants must be strictly increasing"));
        }
        if dtaus_s.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
            return Err(Error::arg("quadrature widths must be finite and positive"));
        }
        Ok(TimeConstantGrid { taus_s, dtaus_s })
    }

    /// Grid on the given time constants with trapezoid widths in linear τ,
    /// the same widths `build_tau_grid` assigns.
    pub fn from_taus(taus_s: Vec<f64>) -> Result<Self> {
        let dtaus = trapezoid_widths(&taus_s);
        TimeConstantGrid::new(taus_s, dtaus)
    }

    /// Default grid for a measured frequency window.
    pub fn for_frequencies(fg: &FrequencyGrid) -> Result<Self> {
        build_tau_grid(fg.min_hz(), fg.max_hz(), DEFAULT_N_TAU, DEFAULT_PAD_DECADES)
    }

    pub fn taus_s(&self) -> &[f64] {
        &self.taus_s
    }

    pub fn dtaus_s(&self) -> &[f64] {
        &self.dtaus_s
    }

    pub fn len(&self) -> usize {
        self.taus_s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taus_s.is_empty()
    }

    /// Same time constants with every quadrature width set to 1. This is the
    /// kernel weighting used when δτ is absorbed into `g`.
    pub fn with_unit_weights(&self) -> TimeConstantGrid {
        TimeConstantGrid {
            taus_s: self.taus_s.clone(),
            dtaus_s: vec![1.0; self.taus_s.len()],
        }
    }

    /// Widths of each point in log10 τ (midpoint rule, half-cells at the ends).
    pub fn log10_widths(&self) -> Vec<f64> {
        let x: Vec<f64> = self.taus_s.iter().map(|t| t.log10()).collect();
        trapezoid_widths(&x)
    }
}

fn trapezoid_widths(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n == 1 {
        return vec![1.0];
    }
    (0..n)
        .map(|k| {
            let lo = if k == 0 { x[0] } else { x[k - 1] };
            let hi = if k == n - 1 { x[n - 1] } else { x[k + 1] };
            (hi - lo) / 2.0
        })
        .collect()
}

/// Log-uniform τ grid covering `1/(2π f_max)` to `1/(2π f_min)`, padded by
/// `pad_decades` on each side, with trapezoid widths in linear τ.
pub fn build_tau_grid(
    f_min_hz: f64,
    f_max_hz: f64,
    n: usize,
    pad_decades: f64,
) -> Result<TimeConstantGrid> {
    if !(f_min_hz.is_finite() && f_max_hz.is_finite() && f_min_hz > 0.0 && f_max_hz > f_min_hz) {
        return Err(Error::arg(format!(
            "need 0 < f_min < f_max, got f_min={f_min_hz}, f_max={f_max_hz}"
        )));
    }
    if n < 2 {
        return Err(Error::arg("tau grid needs n >= 2"));
    }
    if !(pad_decades.is_finite() && pad_decades >= 0.0) {
        return Err(Error::arg("pad_decades must be nonnegative"));
    }
    let lo = (1.0 / (2.0 * PI * f_max_hz)).log10() - pad_decades;
    let hi = (1.0 / (2.0 * PI * f_min_hz)).log10() + pad_decades;
    let step = (hi - lo) / (n - 1) as f64;
    let taus: Vec<f64> = (0..n).map(|k| 10f64.powf(lo + step * k as f64)).collect();
    TimeConstantGrid::from_taus(taus)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpedanceSpectrum {
    freq_grid: FrequencyGrid,
    z_real_ohm: Vec<f64>,
    z_imag_ohm: Vec<f64>,
}

impl ImpedanceSpectrum {
    pub fn new(freq_grid: FrequencyGrid, z_real_ohm: Vec<f64>, z_imag_ohm: Vec<f64>) -> Result<Self> {
        if z_real_ohm.len() != freq_grid.len() || z_imag_ohm.len() != freq_grid.len() {
            return Err(Error::arg("impedance length does not match frequency grid"));
        }
        if z_real_ohm.iter().chain(&z_imag_ohm).any(|v| !v.is_finite()) {
            return Err(Error::arg("impedance values must be finite"));
        }
        Ok(ImpedanceSpectrum {
            freq_grid,
            z_real_ohm,
            z_imag_ohm,
        })
    }

    pub fn freq_grid(&self) -> &FrequencyGrid {
        &self.freq_grid
    }

    pub fn z_real_ohm(&self) -> &[f64] {
        &self.z_real_ohm
    }

    pub fn z_imag_ohm(&self) -> &[f64] {
        &self.z_imag_ohm
    }

    pub fn len(&self) -> usize {
        self.freq_grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freq_grid.is_empty()
    }
}

/// Dense kernel; with `includes_r0_column` the leading column is all ones.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    pub matrix: Matrix,
    pub includes_r0_column: bool,
}

impl KernelMatrix {
    pub fn new(matrix: Matrix, includes_r0_column: bool) -> Result<Self> {
        if !matrix.is_finite() {
            return Err(Error::arg("kernel entries must be finite"));
        }
        if includes_r0_column && (0..matrix.rows()).any(|r| matrix.get(r, 0) != 1.0) {
            return Err(Error::arg("R0 column must be all ones"));
        }
        Ok(KernelMatrix {
            matrix,
            includes_r0_column,
        })
    }

    pub fn rows(&self) -> usize {
        self.matrix.rows()
    }

    pub fn cols(&self) -> usize {
        self.matrix.cols()
    }

    /// Per-column Tikhonov weights: 0 for the R0 column, 1 elsewhere.
    pub fn penalty_mask(&self) -> Vec<f64> {
        let mut mask = vec![1.0; self.cols()];
        if self.includes_r0_column {
            mask[0] = 0.0;
        }
        mask
    }
}

/// `A[m][n] = δτ_n / (1 + ω_m² τ_n²)`, optionally preceded by a column of ones.
pub fn build_kernel_real(fg: &FrequencyGrid, tg: &TimeConstantGrid, with_r0: bool) -> KernelMatrix {
    let omega = fg.angular();
    let off = usize::from(with_r0);
    let matrix = Matrix::from_fn(fg.len(), tg.len() + off, |r, c| {
        if c < off {
            return 1.0;
        }
        let k = c - off;
        let wt = omega[r] * tg.taus_s[k];
        tg.dtaus_s[k] / (1.0 + wt * wt)
    });
    KernelMatrix {
        matrix,
        includes_r0_column: with_r0,
    }
}

/// `A[m][n] = −ω_m τ_n δτ_n / (1 + ω_m² τ_n²)`.
pub fn build_kernel_imag(fg: &FrequencyGrid, tg: &TimeConstantGrid) -> KernelMatrix {
    KernelMatrix {
        matrix: imag_matrix(fg, tg, false),
        includes_r0_column: false,
    }
}

/// Imaginary kernel, optionally with a leading zero column so it can be
/// stacked under a real kernel that carries R0.
pub(crate) fn imag_matrix(fg: &FrequencyGrid, tg: &TimeConstantGrid, with_r0: bool) -> Matrix {
    let omega = fg.angular();
    let off = usize::from(with_r0);
    Matrix::from_fn(fg.len(), tg.len() + off, |r, c| {
        if c < off {
            return 0.0;
        }
        let k = c - off;
        let wt = omega[r] * tg.taus_s[k];
        -wt * tg.dtaus_s[k] / (1.0 + wt * wt)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrtSolution {
    pub tau_grid: TimeConstantGrid,
    pub g_ohm: Vec<f64>,
    pub r0_ohm: f64,
    pub rp_ohm: f64,
    pub lambda: Option<f64>,
    pub report: Option<SolverReport>,
}

impl DrtSolution {
    pub fn new(tau_grid: TimeConstantGrid, g_ohm: Vec<f64>, r0_ohm: f64) -> Result<Self> {
        if g_ohm.len() != tau_grid.len() {
            return Err(Error::arg(format!(
                "g has {} entries but the tau grid has {}",
                g_ohm.len(),
                tau_grid.len()
            )));
        }
        if g_ohm.iter().any(|g| !(g.is_finite() && *g >= 0.0)) {
            return Err(Error::arg("g must be finite and nonnegative"));
        }
        if !(r0_ohm.is_finite() && r0_ohm >= 0.0) {
            return Err(Error::arg("r0 must be finite and nonnegative"));
        }
        let rp_ohm = g_ohm.iter().sum();
        Ok(DrtSolution {
            tau_grid,
            g_ohm,
            r0_ohm,
            rp_ohm,
            lambda: None,
            report: None,
        })
    }

    /// Continuous-density view `g_n / δτ_n` in Ω/s.
    pub fn density(&self) -> Vec<f64> {
        self.g_ohm
            .iter()
            .zip(self.tau_grid.dtaus_s())
            .map(|(g, d)| g / d)
            .collect()
    }
}

/// Impedance of the RC network described by `sol`, evaluated on `fg`.
pub fn forward_model(sol: &DrtSolution, fg: &FrequencyGrid) -> Result<ImpedanceSpectrum> {
    if sol.g_ohm.len() != sol.tau_grid.len() {
        return Err(Error::arg("solution does not match its tau grid"));
    }
    let unit = sol.tau_grid.with_unit_weights();
    let re = build_kernel_real(fg, &unit, false).matrix.matvec(&sol.g_ohm);
    let im = build_kernel_imag(fg, &unit).matrix.matvec(&sol.g_ohm);
    let z_real = re.into_iter().map(|v| v + sol.r0_ohm).collect();
    ImpedanceSpectrum::new(fg.clone(), z_real, im)
}
