//! Seeded synthetic corpus shaped like a 22-cell calendar/cycling aging
//! campaign: capacity checkups at days 0/10/20/40/90 and EIS at five SOCs,
//! generated from a known DRT so every spectrum has a ground truth.
//!
//! A single aging-stress scalar per (cell, day) drives both the capacity
//! fade and the DRT peak evolution, which is what makes the DRT curves
//! informative of SOH.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eis::{
    build_tau_grid, forward_model, DrtSolution, FrequencyGrid, ImpedanceSpectrum,
    TimeConstantGrid, DEFAULT_N_TAU, DEFAULT_PAD_DECADES,
};
use crate::error::{Error, Result};

pub const NOMINAL_CAPACITY_AH: f64 = 5.0;
/// Fresh cells deliver more than the nominal rating.
pub const FRESH_CAPACITY_AH: f64 = 5.4;
pub const CHECKUP_DAYS: [u32; 5] = [0, 10, 20, 40, 90];
pub const SOC_LEVELS: [u32; 5] = [0, 25, 50, 75, 100];
pub const TEMPERATURES_C: [f64; 3] = [0.0, 25.0, 40.0];

// Stress-model coefficients.
const ACTIVATION_J_PER_MOL: f64 = 30_000.0;
const GAS_CONSTANT: f64 = 8.314;
const K_CALENDAR: f64 = 0.0013;
const K_CYCLING: f64 = 1.589e-5;
const CAPACITY_JITTER: f64 = 0.005;
const STRESS_JITTER: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgingKind {
    Calendar,
    Cycling,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingCondition {
    pub aging_kind: AgingKind,
    pub temperature_c: f64,
    /// Cycling window in percent; calendar cells store `(soc, soc)`.
    pub soc_window: (f64, f64),
    pub charge_crate: Option<f64>,
    pub cycles_per_day: Option<u32>,
}

impl OperatingCondition {
    pub fn calendar(temperature_c: f64, storage_soc: f64) -> Result<Self> {
        let c = OperatingCondition {
            aging_kind: AgingKind::Calendar,
            temperature_c,
            soc_window: (storage_soc, storage_soc),
            charge_crate: None,
            cycles_per_day: None,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn cycling(
        temperature_c: f64,
        soc_window: (f64, f64),
        charge_crate: f64,
        cycles_per_day: u32,
    ) -> Result<Self> {
        let c = OperatingCondition {
            aging_kind: AgingKind::Cycling,
            temperature_c,
            soc_window,
            charge_crate: Some(charge_crate),
            cycles_per_day: Some(cycles_per_day),
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !TEMPERATURES_C.contains(&self.temperature_c) {
            return Err(Error::Config(format!(
                "temperature {} °C is not one of 0/25/40",
                self.temperature_c
            )));
        }
        match self.aging_kind {
            AgingKind::Calendar => {
                let (lo, hi) = self.soc_window;
                if lo != hi || !(lo == 80.0 || lo == 100.0) {
                    return Err(Error::Config("calendar storage SOC must be 80 or 100".into()));
                }
                if self.charge_crate.is_some() || self.cycles_per_day.is_some() {
                    return Err(Error::Config(
                        "calendar cells have no C-rate or cycle count".into(),
                    ));
                }
            }
            AgingKind::Cycling => {
                if ![(0.0, 80.0), (10.0, 90.0), (0.0, 100.0)].contains(&self.soc_window) {
                    return Err(Error::Config(format!(
                        "cycling window {:?} is not 0-80, 10-90 or 0-100",
                        self.soc_window
                    )));
                }
                match self.charge_crate {
                    Some(c) if c == 0.2 || c == 1.0 => {}
                    _ => return Err(Error::Config("charge C-rate must be 0.2 or 1".into())),
                }
                match self.cycles_per_day {
                    Some(4 | 5 | 12 | 15) => {}
                    _ => return Err(Error::Config("cycles/day must be 4, 5, 12 or 15".into())),
                }
            }
        }
        Ok(())
    }

    fn depth_of_discharge(&self) -> f64 {
        (self.soc_window.1 - self.soc_window.0) / 100.0
    }
}

/// Arrhenius acceleration relative to 25 °C.
pub fn arrhenius_factor(temperature_c: f64) -> f64 {
    let t = temperature_c + 273.15;
    (-ACTIVATION_J_PER_MOL / GAS_CONSTANT * (1.0 / t - 1.0 / 298.15)).exp()
}

fn window_factor(window: (f64, f64)) -> f64 {
    match window {
        (lo, hi) if lo == 0.0 && hi == 80.0 => 0.5,
        (lo, hi) if lo == 10.0 && hi == 90.0 => 0.7,
        _ => 1.0,
    }
}

/// Ah passed through the cell (charge + discharge) by `day`.
pub fn throughput_ah(condition: &OperatingCondition, day: f64) -> f64 {
    match condition.aging_kind {
        AgingKind::Calendar => 0.0,
        AgingKind::Cycling => {
            let cycles = condition.cycles_per_day.unwrap_or(0) as f64 * day;
            cycles * 2.0 * condition.depth_of_discharge() * NOMINAL_CAPACITY_AH
        }
    }
}

/// Deterministic aging stress (fractional capacity loss) of the condition
/// itself, before cell-to-cell variation.
pub fn nominal_stress(condition: &OperatingCondition, day: f64) -> f64 {
    let arr = arrhenius_factor(condition.temperature_c);
    let storage = match condition.aging_kind {
        AgingKind::Calendar => condition.soc_window.0 / 100.0,
        AgingKind::Cycling => 0.7,
    };
    let calendar = K_CALENDAR * arr * storage * day.max(0.0).sqrt();
    let cycling = match condition.aging_kind {
        AgingKind::Calendar => 0.0,
        AgingKind::Cycling => {
            let crate_factor = if condition.charge_crate == Some(1.0) { 1.0 } else { 0.8 };
            K_CYCLING * arr * window_factor(condition.soc_window) * crate_factor
                * throughput_ah(condition, day)
        }
    };
    calendar + cycling
}

/// Per-cell random offsets, all drawn from the cell seed.
#[derive(Debug, Clone, Copy)]
struct CellJitter {
    capacity: f64,
    stress: f64,
    r0: f64,
    heights: [f64; 4],
    centers: [f64; 4],
}

impl CellJitter {
    fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sym = |amp: f64| amp * (2.0 * rng.random::<f64>() - 1.0);
        CellJitter {
            capacity: sym(CAPACITY_JITTER),
            stress: sym(STRESS_JITTER),
            r0: sym(0.03),
            heights: [sym(0.03), sym(0.03), sym(0.03), sym(0.03)],
            centers: [sym(0.03), sym(0.03), sym(0.03), sym(0.03)],
        }
    }
}

/// Aging stress including cell-level variation; shared by capacity and DRT.
pub fn aging_stress(condition: &OperatingCondition, day: u32, seed: u64) -> f64 {
    nominal_stress(condition, day as f64) * (1.0 + CellJitter::new(seed).stress)
}

pub fn gen_capacity(condition: &OperatingCondition, day: u32, seed: u64) -> f64 {
    let j = CellJitter::new(seed);
    let stress = nominal_stress(condition, day as f64) * (1.0 + j.stress);
    let cap = FRESH_CAPACITY_AH * (1.0 + j.capacity) * (1.0 - stress);
    cap.max(0.5 * NOMINAL_CAPACITY_AH)
}

/// One log-normal peak in log10 τ. `height_ohm` is the peak value of the
/// distribution per decade of τ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakSpec {
    pub center_log10_tau: f64,
    pub height_ohm: f64,
    pub width_log10: f64,
}

impl PeakSpec {
    pub fn new(center_log10_tau: f64, height_ohm: f64, width_log10: f64) -> Result<Self> {
        if !(width_log10.is_finite() && width_log10 > 0.0) || !(height_ohm >= 0.0) {
            return Err(Error::arg("peak width must be > 0 and height >= 0"));
        }
        Ok(PeakSpec {
            center_log10_tau,
            height_ohm,
            width_log10,
        })
    }

    /// Total resistance under the peak.
    pub fn resistance_ohm(&self) -> f64 {
        self.height_ohm * self.width_log10 * (2.0 * std::f64::consts::PI).sqrt()
    }

    fn value(&self, x: f64) -> f64 {
        let u = (x - self.center_log10_tau) / self.width_log10;
        self.height_ohm * (-0.5 * u * u).exp()
    }
}

/// Which process a truth peak represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PeakRole {
    Sei,
    ChargeTransfer,
    Diffusion,
}

fn check_day_soc(day: u32, soc: u32) -> Result<()> {
    if !CHECKUP_DAYS.contains(&day) {
        return Err(Error::arg(format!("day {day} is not a checkup day")));
    }
    if !SOC_LEVELS.contains(&soc) {
        return Err(Error::arg(format!("SOC {soc}% is not a measured level")));
    }
    Ok(())
}

fn soc_scale(soc: u32) -> f64 {
    match soc {
        0 => 1.8,
        25 => 1.1,
        50 => 1.0,
        75 => 0.95,
        _ => 1.0,
    }
}

fn diffusion_base(soc: u32) -> f64 {
    match soc {
        0 => 0.030,
        25 => 0.016,
        50 => 0.013,
        75 => 0.011,
        _ => 0.012,
    }
}

/// Truth DRT peaks, tagged with the process each represents.
pub fn gen_truth_peaks(
    condition: &OperatingCondition,
    day: u32,
    soc: u32,
    seed: u64,
) -> Result<Vec<(PeakRole, PeakSpec)>> {
    condition.validate()?;
    check_day_soc(day, soc)?;
    let j = CellJitter::new(seed);
    let s = nominal_stress(condition, day as f64) * (1.0 + j.stress);
    let scale = soc_scale(soc);

    let mut peaks = Vec::with_capacity(4);
    // SEI/CEI: grows strongly and drifts to shorter τ.
    peaks.push((
        PeakRole::Sei,
        PeakSpec::new(
            -2.6 - 0.4 * s + j.centers[0],
            0.010 * scale * (1.0 + 3.0 * s) * (1.0 + j.heights[0]),
            0.25,
        )?,
    ));
    // Charge transfer: mild growth; split in two at 0% SOC.
    if soc == 0 {
        peaks.push((
            PeakRole::ChargeTransfer,
            PeakSpec::new(
                -1.5 - 0.1 * s + j.centers[1],
                0.012 * scale * (1.0 + s) * (1.0 + j.heights[1]),
                0.18,
            )?,
        ));
        peaks.push((
            PeakRole::ChargeTransfer,
            PeakSpec::new(
                -0.5 - 0.1 * s + j.centers[2],
                0.010 * scale * (1.0 + s) * (1.0 + j.heights[2]),
                0.18,
            )?,
        ));
    } else {
        peaks.push((
            PeakRole::ChargeTransfer,
            PeakSpec::new(
                -1.0 - 0.2 * s + j.centers[1],
                0.008 * scale * (1.0 + 0.5 * s) * (1.0 + j.heights[1]),
                0.25,
            )?,
        ));
    }
    // Diffusion: grows at low/mid SOC, shrinks mildly at high SOC.
    let trend = if soc <= 50 { 1.0 + s } else { 1.0 - 0.3 * s };
    peaks.push((
        PeakRole::Diffusion,
        PeakSpec::new(
            0.5 + j.centers[3],
            diffusion_base(soc) * trend * (1.0 + j.heights[3]),
            0.3,
        )?,
    ));
    Ok(peaks)
}

/// Truth DRT as a list of log-normal peaks.
pub fn gen_truth_drt(
    condition: &OperatingCondition,
    day: u32,
    soc: u32,
    seed: u64,
) -> Result<Vec<PeakSpec>> {
    Ok(gen_truth_peaks(condition, day, soc, seed)?
        .into_iter()
        .map(|(_, p)| p)
        .collect())
}

pub fn truth_r0(condition: &OperatingCondition, day: u32, seed: u64) -> f64 {
    let j = CellJitter::new(seed);
    let s = nominal_stress(condition, day as f64) * (1.0 + j.stress);
    0.018 * (1.0 + 0.4 * s) * (1.0 + j.r0)
}

/// Sample peaks onto `tg`, giving each grid point the resistance of its
/// log10-τ cell.
pub fn discretize_peaks(peaks: &[PeakSpec], tg: &TimeConstantGrid, r0_ohm: f64) -> Result<DrtSolution> {
    let widths = tg.log10_widths();
    let g = tg
        .taus_s()
        .iter()
        .zip(&widths)
        .map(|(t, w)| peaks.iter().map(|p| p.value(t.log10())).sum::<f64>() * w)
        .collect();
    DrtSolution::new(tg.clone(), g, r0_ohm)
}

/// Multiplicative Gaussian noise on both impedance components.
pub fn add_noise(spectrum: &ImpedanceSpectrum, sigma: f64, seed: u64) -> Result<ImpedanceSpectrum> {
    if sigma == 0.0 {
        return Ok(spectrum.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut noisy = |v: &f64| {
        let e: f64 = rng.sample(StandardNormal);
        v * (1.0 + sigma * e)
    };
    let re: Vec<f64> = spectrum.z_real_ohm().iter().map(&mut noisy).collect();
    let im: Vec<f64> = spectrum.z_imag_ohm().iter().map(&mut noisy).collect();
    ImpedanceSpectrum::new(spectrum.freq_grid().clone(), re, im)
}

/// Stateless 64-bit mixer for deriving child seeds.
pub fn mix_seed(parts: &[u64]) -> u64 {
    let mut h: u64 = 0x9E37_79B9_7F4A_7C15;
    for &p in parts {
        h ^= p.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_add(h << 6).wrapping_add(h >> 2);
        // splitmix64 finalizer
        h = (h ^ (h >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        h = (h ^ (h >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        h ^= h >> 31;
    }
    h
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub cells: Vec<OperatingCondition>,
    pub noise_sigma: f64,
    pub f_min_hz: f64,
    pub f_max_hz: f64,
    pub n_freq: usize,
    pub n_tau: usize,
    pub pad_decades: f64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            cells: default_cell_layout(),
            noise_sigma: 0.003,
            f_min_hz: 1e-2,
            f_max_hz: 1e4,
            n_freq: 60,
            n_tau: DEFAULT_N_TAU,
            pad_decades: DEFAULT_PAD_DECADES,
        }
    }
}

impl DatasetConfig {
    pub fn freq_grid(&self) -> Result<FrequencyGrid> {
        FrequencyGrid::log_spaced_descending(self.f_min_hz, self.f_max_hz, self.n_freq)
    }

    pub fn tau_grid(&self) -> Result<TimeConstantGrid> {
        build_tau_grid(self.f_min_hz, self.f_max_hz, self.n_tau, self.pad_decades)
    }

    pub fn validate(&self) -> Result<()> {
        let calendar = self
            .cells
            .iter()
            .filter(|c| c.aging_kind == AgingKind::Calendar)
            .count();
        let cycling = self.cells.len() - calendar;
        if calendar != 5 || cycling != 17 {
            return Err(Error::Config(format!(
                "dataset needs 5 calendar + 17 cycling cells, got {calendar} + {cycling}"
            )));
        }
        for c in &self.cells {
            c.validate()?;
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::Config("noise sigma must be >= 0".into()));
        }
        Ok(())
    }
}

/// The fixed condition-to-cell mapping used for cells S01..S22: five
/// calendar cells followed by seventeen cycling cells grouped by
/// temperature. S22 is the harshest condition.
pub fn default_cell_layout() -> Vec<OperatingCondition> {
    let cal = |t, s| OperatingCondition::calendar(t, s).expect("valid layout");
    let cyc = |t, w, c, n| OperatingCondition::cycling(t, w, c, n).expect("valid layout");
    vec![
        cal(0.0, 100.0),
        cal(25.0, 80.0),
        cal(25.0, 100.0),
        cal(40.0, 80.0),
        cal(40.0, 100.0),
        cyc(0.0, (0.0, 100.0), 0.2, 4),
        cyc(0.0, (0.0, 80.0), 1.0, 15),
        cyc(0.0, (10.0, 90.0), 1.0, 12),
        cyc(0.0, (0.0, 100.0), 1.0, 15),
        cyc(0.0, (10.0, 90.0), 0.2, 5),
        cyc(25.0, (0.0, 100.0), 0.2, 4),
        cyc(25.0, (0.0, 80.0), 1.0, 12),
        cyc(25.0, (10.0, 90.0), 1.0, 15),
        cyc(25.0, (0.0, 100.0), 1.0, 12),
        cyc(25.0, (0.0, 80.0), 0.2, 5),
        cyc(25.0, (0.0, 100.0), 1.0, 15),
        cyc(40.0, (0.0, 100.0), 0.2, 5),
        cyc(40.0, (0.0, 80.0), 1.0, 15),
        cyc(40.0, (10.0, 90.0), 1.0, 12),
        cyc(40.0, (10.0, 90.0), 0.2, 4),
        cyc(40.0, (0.0, 80.0), 0.2, 5),
        cyc(40.0, (0.0, 100.0), 1.0, 15),
    ]
}

/// The harshest menu condition: 40 °C, 0–100 %, 1C, 15 cycles/day.
pub fn harshest_condition() -> OperatingCondition {
    OperatingCondition::cycling(40.0, (0.0, 100.0), 1.0, 15).expect("valid condition")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRecord {
    pub day: u32,
    pub soc: u32,
    pub spectrum: ImpedanceSpectrum,
    /// Generating DRT; absent for spectra loaded from disk.
    pub truth: Option<DrtSolution>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub cell_id: String,
    pub condition: OperatingCondition,
    pub nominal_capacity_ah: f64,
    pub checkup_days: Vec<u32>,
    pub capacities_ah: Vec<f64>,
    /// Ordered by day, then SOC.
    pub spectra: Vec<SpectrumRecord>,
}

impl CellRecord {
    pub fn soh(&self) -> Vec<f64> {
        self.capacities_ah
            .iter()
            .map(|c| c / self.nominal_capacity_ah)
            .collect()
    }

    pub fn spectrum(&self, day: u32, soc: u32) -> Option<&SpectrumRecord> {
        self.spectra.iter().find(|s| s.day == day && s.soc == soc)
    }
}

pub fn cell_id(index: usize) -> String {
    format!("S{:02}", index + 1)
}

pub fn cell_seed(master_seed: u64, index: usize) -> u64 {
    mix_seed(&[master_seed, index as u64])
}

pub fn gen_dataset(config: &DatasetConfig, master_seed: u64) -> Result<Vec<CellRecord>> {
    config.validate()?;
    let fg = config.freq_grid()?;
    let tg = config.tau_grid()?;
    config
        .cells
        .par_iter()
        .enumerate()
        .map(|(idx, cond)| gen_cell(config, &fg, &tg, idx, cond, master_seed))
        .collect()
}

fn gen_cell(
    config: &DatasetConfig,
    fg: &FrequencyGrid,
    tg: &TimeConstantGrid,
    idx: usize,
    cond: &OperatingCondition,
    master_seed: u64,
) -> Result<CellRecord> {
    let seed = cell_seed(master_seed, idx);
    let capacities_ah = CHECKUP_DAYS.iter().map(|&d| gen_capacity(cond, d, seed)).collect();
    let mut spectra = Vec::with_capacity(CHECKUP_DAYS.len() * SOC_LEVELS.len());
    for &day in &CHECKUP_DAYS {
        for &soc in &SOC_LEVELS {
            let peaks = gen_truth_drt(cond, day, soc, seed)?;
            let truth = discretize_peaks(&peaks, tg, truth_r0(cond, day, seed))?;
            let clean = forward_model(&truth, fg)?;
            let noise_seed = mix_seed(&[seed, day as u64, soc as u64, 0x4E01_5E]);
            let spectrum = add_noise(&clean, config.noise_sigma, noise_seed)?;
            spectra.push(SpectrumRecord {
                day,
                soc,
                spectrum,
                truth: Some(truth),
            });
        }
    }
    Ok(CellRecord {
        cell_id: cell_id(idx),
        condition: *cond,
        nominal_capacity_ah: NOMINAL_CAPACITY_AH,
        checkup_days: CHECKUP_DAYS.to_vec(),
        capacities_ah,
        spectra,
    })
}

/// A single noisy spectrum with three well-separated peaks (SOC ≠ 0) and its
/// truth, for solver benchmarks.
pub struct Benchmark {
    pub truth: DrtSolution,
    pub peaks: Vec<PeakSpec>,
    pub spectrum: ImpedanceSpectrum,
}

pub fn three_peak_benchmark(seed: u64, noise_sigma: f64) -> Result<Benchmark> {
    let config = DatasetConfig::default();
    let fg = config.freq_grid()?;
    let tg = config.tau_grid()?;
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[seed, 0xBE4C]));
    let cells = default_cell_layout();
    let cond = cells[rng.random_range(0..cells.len())];
    let day = CHECKUP_DAYS[rng.random_range(0..CHECKUP_DAYS.len())];
    let soc = SOC_LEVELS[rng.random_range(1..SOC_LEVELS.len())];
    let cell = rng.random::<u64>();
    let peaks = gen_truth_drt(&cond, day, soc, cell)?;
    let truth = discretize_peaks(&peaks, &tg, truth_r0(&cond, day, cell))?;
    let spectrum = add_noise(&forward_model(&truth, &fg)?, noise_sigma, rng.random())?;
    Ok(Benchmark {
        truth,
        peaks,
        spectrum,
    })
}
