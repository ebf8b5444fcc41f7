//! Peak and band features of a DRT solution.
//!
//! Peaks are located on the distribution per decade of τ (`g_n` divided by
//! the log10 width of its grid cell), which is the conventional DRT plot;
//! the linear-τ density `g/δτ` is reported as the peak height.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::eis::DrtSolution;

/// Band edges in seconds. A point exactly on an edge belongs to the lower band.
pub const SEI_UPPER_TAU_S: f64 = 1e-2;
pub const CHARGE_TRANSFER_UPPER_TAU_S: f64 = 1.0;
pub const DEFAULT_RELATIVE_PROMINENCE: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Band {
    Sei,
    ChargeTransfer,
    Diffusion,
}

impl Band {
    pub const ALL: [Band; 3] = [Band::Sei, Band::ChargeTransfer, Band::Diffusion];

    pub fn of_tau(tau_s: f64) -> Band {
        if tau_s <= SEI_UPPER_TAU_S {
            Band::Sei
        } else if tau_s <= CHARGE_TRANSFER_UPPER_TAU_S {
            Band::ChargeTransfer
        } else {
            Band::Diffusion
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Band::Sei => "sei",
            Band::ChargeTransfer => "charge_transfer",
            Band::Diffusion => "diffusion",
        }
    }
}

impl fmt::Display for Band {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DrtPeak {
    pub index: usize,
    pub tau_at_max_s: f64,
    /// `g/δτ` at the maximum (Ω/s).
    pub height_ohm_per_s: f64,
    /// Peak value of the per-decade distribution (Ω/decade).
    pub height_ohm_per_decade: f64,
    pub prominence_ohm_per_decade: f64,
    /// Resistance in the peak's watershed (Ω).
    pub area_ohm: f64,
    pub band: Band,
}

/// `g_n` per decade of τ, using full cell widths at the grid ends.
pub fn per_decade(sol: &DrtSolution) -> Vec<f64> {
    let x: Vec<f64> = sol.tau_grid.taus_s().iter().map(|t| t.log10()).collect();
    let n = x.len();
    sol.g_ohm
        .iter()
        .enumerate()
        .map(|(k, g)| {
            let w = if n == 1 {
                1.0
            } else if k == 0 {
                x[1] - x[0]
            } else if k == n - 1 {
                x[n - 1] - x[n - 2]
            } else {
                (x[k + 1] - x[k - 1]) / 2.0
            };
            g / w
        })
        .collect()
}

/// Local maxima (plateaus resolved to their middle) and their topographic
/// prominence. End points are never peaks.
fn local_maxima(y: &[f64]) -> Vec<(usize, f64)> {
    let n = y.len();
    let mut out = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        if y[i] > y[i - 1] {
            let mut j = i;
            while j + 1 < n && y[j + 1] == y[i] {
                j += 1;
            }
            if j + 1 < n && y[j + 1] < y[i] {
                let mid = (i + j) / 2;
                out.push((mid, prominence(y, mid)));
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    out
}

fn prominence(y: &[f64], peak: usize) -> f64 {
    let h = y[peak];
    let mut left_min = h;
    for k in (0..peak).rev() {
        if y[k] > h {
            break;
        }
        left_min = left_min.min(y[k]);
    }
    let mut right_min = h;
    for &v in &y[peak + 1..] {
        if v > h {
            break;
        }
        right_min = right_min.min(v);
    }
    h - left_min.max(right_min)
}

/// Peaks whose prominence is at least `min_prominence_ohm_per_decade`,
/// sorted by τ. Each peak's area is the resistance between the minima
/// separating it from its neighbours (the minimum itself goes to the lower-τ
/// peak); together the areas partition `Rp`.
pub fn find_peaks(sol: &DrtSolution, min_prominence_ohm_per_decade: f64) -> Vec<DrtPeak> {
    let y = per_decade(sol);
    let peaks: Vec<(usize, f64)> = local_maxima(&y)
        .into_iter()
        .filter(|(_, p)| *p >= min_prominence_ohm_per_decade && *p > 0.0)
        .collect();
    if peaks.is_empty() {
        return Vec::new();
    }

    let mut bounds = vec![0usize];
    for w in peaks.windows(2) {
        let (a, b) = (w[0].0, w[1].0);
        let mut cut = a;
        for k in a..=b {
            if y[k] < y[cut] {
                cut = k;
            }
        }
        bounds.push(cut + 1);
    }
    bounds.push(y.len());

    let density = sol.density();
    let taus = sol.tau_grid.taus_s();
    peaks
        .iter()
        .enumerate()
        .map(|(k, &(idx, prom))| DrtPeak {
            index: idx,
            tau_at_max_s: taus[idx],
            height_ohm_per_s: density[idx],
            height_ohm_per_decade: y[idx],
            prominence_ohm_per_decade: prom,
            area_ohm: sol.g_ohm[bounds[k]..bounds[k + 1]].iter().sum(),
            band: Band::of_tau(taus[idx]),
        })
        .collect()
}

/// `find_peaks` with the prominence threshold at 2% of the distribution's
/// maximum.
pub fn find_peaks_default(sol: &DrtSolution) -> Vec<DrtPeak> {
    let max = per_decade(sol).into_iter().fold(0.0, f64::max);
    find_peaks(sol, DEFAULT_RELATIVE_PROMINENCE * max)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct BandResistances {
    pub sei: f64,
    pub charge_transfer: f64,
    pub diffusion: f64,
}

impl BandResistances {
    pub fn get(&self, band: Band) -> f64 {
        match band {
            Band::Sei => self.sei,
            Band::ChargeTransfer => self.charge_transfer,
            Band::Diffusion => self.diffusion,
        }
    }

    pub fn total(&self) -> f64 {
        self.sei + self.charge_transfer + self.diffusion
    }

    pub fn to_map(&self) -> BTreeMap<Band, f64> {
        Band::ALL.iter().map(|&b| (b, self.get(b))).collect()
    }
}

pub fn band_resistances(sol: &DrtSolution) -> BandResistances {
    let mut out = BandResistances::default();
    for (t, g) in sol.tau_grid.taus_s().iter().zip(&sol.g_ohm) {
        match Band::of_tau(*t) {
            Band::Sei => out.sei += g,
            Band::ChargeTransfer => out.charge_transfer += g,
            Band::Diffusion => out.diffusion += g,
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eis::{build_tau_grid, TimeConstantGrid};

    fn grid() -> TimeConstantGrid {
        build_tau_grid(1e-2, 1e4, 81, 1.0).unwrap()
    }

    #[test]
    fn single_spike_one_peak() {
        let tg = grid();
        let mut g = vec![0.0; 81];
        g[40] = 0.013;
        let sol = DrtSolution::new(tg, g, 0.0).unwrap();
        let peaks = find_peaks_default(&sol);
        assert_eq!(peaks.len(), 1);
        assert_eq!(peaks[0].index, 40);
        assert_eq!(peaks[0].area_ohm, 0.013);
    }

    #[test]
    fn zero_g_has_no_peaks_and_empty_bands() {
        let sol = DrtSolution::new(grid(), vec![0.0; 81], 0.01).unwrap();
        assert!(find_peaks_default(&sol).is_empty());
        assert_eq!(band_resistances(&sol), BandResistances::default());
    }

    #[test]
    fn spike_at_1ms_is_sei() {
        let tg = TimeConstantGrid::new(vec![1e-4, 1e-3, 1e-1, 10.0], vec![1.0; 4]).unwrap();
        let sol = DrtSolution::new(tg, vec![0.0, 0.02, 0.0, 0.0], 0.0).unwrap();
        let b = band_resistances(&sol);
        assert_eq!(b.sei, 0.02);
        assert_eq!(b.charge_transfer + b.diffusion, 0.0);
    }

    #[test]
    fn band_edges_belong_to_lower_band() {
        assert_eq!(Band::of_tau(1e-2), Band::Sei);
        assert_eq!(Band::of_tau(1.0), Band::ChargeTransfer);
        assert_eq!(Band::of_tau(1.0000001), Band::Diffusion);
    }

    #[test]
    fn watershed_areas_partition_rp() {
        let tg = grid();
        let g: Vec<f64> = (0..81)
            .map(|k| {
                let x = k as f64;
                0.002 * (-(x - 20.0).powi(2) / 8.0).exp() + 0.001 * (-(x - 50.0).powi(2) / 18.0).exp()
            })
            .collect();
        let sol = DrtSolution::new(tg, g, 0.0).unwrap();
        let peaks = find_peaks_default(&sol);
        assert_eq!(peaks.len(), 2);
        let total: f64 = peaks.iter().map(|p| p.area_ohm).sum();
        assert!((total - sol.rp_ohm).abs() <= 1e-15 * sol.rp_ohm.max(1.0));
        assert!(peaks.iter().all(|p| p.area_ohm <= sol.rp_ohm));
    }

    #[test]
    fn prominence_filters_shoulders() {
        let y = [0.0, 1.0, 0.95, 0.97, 0.2, 0.0];
        let m = local_maxima(&y);
        assert_eq!(m.len(), 2);
        assert!((m[1].1 - 0.02).abs() < 1e-12);
    }
}
