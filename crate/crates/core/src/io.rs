//! On-disk formats: spectrum and DRT CSVs, the dataset manifest, feature
//! tables, model checkpoints, and experiment outputs.
//!
//! Floats are written in shortest round-trip form, so reading a file back
//! reproduces the values exactly and repeated runs write identical bytes.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::drt::{FitMode, SolverReport};
use crate::eis::{DrtSolution, FrequencyGrid, ImpedanceSpectrum, TimeConstantGrid};
use crate::error::{Error, Result};
use crate::eval::{ExperimentResult, SplitSpec};
use crate::features::{band_resistances, find_peaks_default, Band};
use crate::soh::{EpochRecord, ModelConfig, Normalizer, SohModel, TensorInfo, TrainConfig};
use crate::synthetic::{CellRecord, DatasetConfig, OperatingCondition, SpectrumRecord};

pub const SCHEMA_VERSION: u32 = 1;

pub const SPECTRUM_HEADER: [&str; 3] = ["freq_hz", "z_real_ohm", "z_imag_ohm"];
pub const DRT_HEADER: [&str; 3] = ["tau_s", "g_ohm", "g_density_ohm_per_s"];
pub const FEATURE_HEADER: [&str; 7] = ["cell_id", "day", "soc", "band", "area_ohm", "peak_tau_s", "peak_height"];
pub const HISTORY_HEADER: [&str; 4] = ["epoch", "train_mse", "val_mse", "lr"];
pub const RESULTS_HEADER: [&str; 5] = ["category", "set", "model", "rmse_ah", "rmspe_pct"];
pub const TRAJECTORY_HEADER: [&str; 7] = ["category", "set", "model", "cell_id", "day", "true_soh", "estimated_soh"];
pub const LCURVE_HEADER: [&str; 3] = ["lambda", "residual_norm", "solution_norm"];

fn label(path: &Path) -> String {
    path.display().to_string()
}

fn csv_string<R, I>(header: &[&str], rows: R) -> String
where
    R: IntoIterator<Item = I>,
    I: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

/// Write `contents`, creating parent directories as needed.
pub fn write_text(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, contents)?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: label(path),
        line: e.line(),
        message: e.to_string(),
    })
}

/// Numeric table with a fixed header. Returns rows with their 1-based line
/// numbers.
fn parse_numeric_table(text: &str, path: &str, header: &[&str]) -> Result<Vec<(usize, Vec<f64>)>> {
    let err = |line: usize, message: String| Error::Parse {
        path: path.to_string(),
        line,
        message,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let found = rdr.headers().map_err(|e| err(1, e.to_string()))?.clone();
    if found.iter().collect::<Vec<_>>() != header {
        return Err(err(1, format!("expected header `{}`, found `{}`", header.join(","), found.iter().collect::<Vec<_>>().join(","))));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            err(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != header.len() {
            return Err(err(line, format!("expected {} fields, found {}", header.len(), rec.len())));
        }
        let vals = rec
            .iter()
            .zip(header)
            .map(|(field, name)| {
                field
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| err(line, format!("{name}: `{field}` is not a finite number")))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push((line, vals));
    }
    if rows.is_empty() {
        return Err(err(1, "no data rows".into()));
    }
    Ok(rows)
}

pub fn spectrum_to_csv(spectrum: &ImpedanceSpectrum) -> String {
    let rows = spectrum
        .freq_grid()
        .freqs_hz()
        .iter()
        .zip(spectrum.z_real_ohm())
        .zip(spectrum.z_imag_ohm())
        .map(|((f, re), im)| vec![f.to_string(), re.to_string(), im.to_string()]);
    csv_string(&SPECTRUM_HEADER, rows)
}

pub fn parse_spectrum_csv(text: &str, path: &str) -> Result<ImpedanceSpectrum> {
    let rows = parse_numeric_table(text, path, &SPECTRUM_HEADER)?;
    let wrap = |e: Error| Error::Parse {
        path: path.to_string(),
        line: rows.first().map_or(1, |r| r.0),
        message: e.to_string(),
    };
    let fg = FrequencyGrid::new(rows.iter().map(|r| r.1[0]).collect()).map_err(wrap)?;
    ImpedanceSpectrum::new(
        fg,
        rows.iter().map(|r| r.1[1]).collect(),
        rows.iter().map(|r| r.1[2]).collect(),
    )
    .map_err(wrap)
}

pub fn read_spectrum_csv(path: &Path) -> Result<ImpedanceSpectrum> {
    parse_spectrum_csv(&fs::read_to_string(path)?, &label(path))
}

pub fn write_spectrum_csv(path: &Path, spectrum: &ImpedanceSpectrum) -> Result<()> {
    write_text(path, &spectrum_to_csv(spectrum))
}

/// Scalars that accompany a DRT CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrtSidecar {
    pub schema_version: u32,
    pub source: String,
    pub mode: FitMode,
    pub r0_ohm: f64,
    pub rp_ohm: f64,
    pub lambda: Option<f64>,
    /// `fixed` when λ was given, `lcurve` when it was selected.
    pub lambda_source: String,
    pub report: Option<SolverReport>,
    /// Generating resistances, when the spectrum came from a synthetic dataset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth_r0_ohm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth_rp_ohm: Option<f64>,
}

pub fn drt_to_csv(sol: &DrtSolution) -> String {
    let density = sol.density();
    let rows = sol
        .tau_grid
        .taus_s()
        .iter()
        .zip(&sol.g_ohm)
        .zip(&density)
        .map(|((t, g), d)| vec![t.to_string(), g.to_string(), d.to_string()]);
    csv_string(&DRT_HEADER, rows)
}

/// `foo.csv` → `foo.json`.
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

pub fn write_drt(csv_path: &Path, sol: &DrtSolution, sidecar: &DrtSidecar) -> Result<()> {
    write_text(csv_path, &drt_to_csv(sol))?;
    write_json(&sidecar_path(csv_path), sidecar)
}

/// Time constants and `g` from a DRT CSV alone.
pub fn read_drt_table(csv_path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let rows = parse_numeric_table(&fs::read_to_string(csv_path)?, &label(csv_path), &DRT_HEADER)?;
    Ok(rows.iter().map(|r| (r.1[0], r.1[1])).unzip())
}

/// `(λ, residual norm, solution norm)` rows from an L-curve CSV.
pub fn read_lcurve_table(csv_path: &Path) -> Result<Vec<[f64; 3]>> {
    let rows = parse_numeric_table(&fs::read_to_string(csv_path)?, &label(csv_path), &LCURVE_HEADER)?;
    Ok(rows.iter().map(|r| [r.1[0], r.1[1], r.1[2]]).collect())
}

/// First line of a file, for telling table kinds apart.
pub fn read_header(path: &Path) -> Result<String> {
    let text = fs::read_to_string(path)?;
    Ok(text.lines().next().unwrap_or("").trim().to_string())
}

/// Read a DRT CSV and its sidecar back into a solution.
pub fn read_drt(csv_path: &Path) -> Result<(DrtSolution, DrtSidecar)> {
    let path = label(csv_path);
    let rows = parse_numeric_table(&fs::read_to_string(csv_path)?, &path, &DRT_HEADER)?;
    let wrap = |e: Error| Error::Parse {
        path: path.clone(),
        line: 2,
        message: e.to_string(),
    };
    let tg = TimeConstantGrid::from_taus(rows.iter().map(|r| r.1[0]).collect()).map_err(wrap)?;
    let sidecar: DrtSidecar = read_json(&sidecar_path(csv_path))?;
    let mut sol = DrtSolution::new(tg, rows.iter().map(|r| r.1[1]).collect(), sidecar.r0_ohm).map_err(wrap)?;
    sol.lambda = sidecar.lambda;
    sol.report = sidecar.report.clone();
    Ok((sol, sidecar))
}

pub fn lcurve_to_csv(points: &[crate::drt::LCurvePoint]) -> String {
    let rows = points.iter().map(|p| {
        vec![
            p.lambda.to_string(),
            p.residual_norm.to_string(),
            p.solution_norm.to_string(),
        ]
    });
    csv_string(&LCURVE_HEADER, rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestSpectrum {
    pub day: u32,
    pub soc: u32,
    /// Relative to the manifest's directory.
    pub path: String,
    pub truth_r0_ohm: Option<f64>,
    pub truth_rp_ohm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestCell {
    pub cell_id: String,
    pub condition: OperatingCondition,
    pub nominal_capacity_ah: f64,
    pub checkup_days: Vec<u32>,
    pub capacities_ah: Vec<f64>,
    pub spectra: Vec<ManifestSpectrum>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub master_seed: u64,
    pub noise_sigma: f64,
    pub f_min_hz: f64,
    pub f_max_hz: f64,
    pub n_freq: usize,
    pub n_tau: usize,
    pub pad_decades: f64,
    pub cells: Vec<ManifestCell>,
}

impl Manifest {
    pub fn dataset_config(&self) -> DatasetConfig {
        DatasetConfig {
            cells: self.cells.iter().map(|c| c.condition).collect(),
            noise_sigma: self.noise_sigma,
            f_min_hz: self.f_min_hz,
            f_max_hz: self.f_max_hz,
            n_freq: self.n_freq,
            n_tau: self.n_tau,
            pad_decades: self.pad_decades,
        }
    }

    pub fn tau_grid(&self) -> Result<TimeConstantGrid> {
        self.dataset_config().tau_grid()
    }

    pub fn spectrum_count(&self) -> usize {
        self.cells.iter().map(|c| c.spectra.len()).sum()
    }
}

pub const MANIFEST_FILE: &str = "manifest.json";

pub fn spectrum_file_name(cell_id: &str, day: u32, soc: u32) -> String {
    format!("{cell_id}_d{day:03}_soc{soc:03}.csv")
}

/// Write every spectrum under `dir/spectra/` and the manifest at
/// `dir/manifest.json`.
pub fn write_dataset(dir: &Path, config: &DatasetConfig, master_seed: u64, cells: &[CellRecord]) -> Result<Manifest> {
    let mut mcells = Vec::with_capacity(cells.len());
    for c in cells {
        let mut spectra = Vec::with_capacity(c.spectra.len());
        for s in &c.spectra {
            let rel = format!("spectra/{}", spectrum_file_name(&c.cell_id, s.day, s.soc));
            write_spectrum_csv(&dir.join(&rel), &s.spectrum)?;
            spectra.push(ManifestSpectrum {
                day: s.day,
                soc: s.soc,
                path: rel,
                truth_r0_ohm: s.truth.as_ref().map(|t| t.r0_ohm),
                truth_rp_ohm: s.truth.as_ref().map(|t| t.rp_ohm),
            });
        }
        mcells.push(ManifestCell {
            cell_id: c.cell_id.clone(),
            condition: c.condition,
            nominal_capacity_ah: c.nominal_capacity_ah,
            checkup_days: c.checkup_days.clone(),
            capacities_ah: c.capacities_ah.clone(),
            spectra,
        });
    }
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        master_seed,
        noise_sigma: config.noise_sigma,
        f_min_hz: config.f_min_hz,
        f_max_hz: config.f_max_hz,
        n_freq: config.n_freq,
        n_tau: config.n_tau,
        pad_decades: config.pad_decades,
        cells: mcells,
    };
    write_json(&dir.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let m: Manifest = read_json(path)?;
    if m.schema_version != SCHEMA_VERSION {
        return Err(Error::Data(format!(
            "{}: schema_version {} is not supported (expected {SCHEMA_VERSION})",
            label(path),
            m.schema_version
        )));
    }
    Ok(m)
}

/// Accepts either the manifest file or the directory holding it.
pub fn resolve_manifest(path: &Path) -> PathBuf {
    if path.is_dir() {
        path.join(MANIFEST_FILE)
    } else {
        path.to_path_buf()
    }
}

/// Load a dataset written by `write_dataset`. Truth DRTs are not stored, so
/// the returned records carry `truth: None`.
pub fn load_dataset(path: &Path) -> Result<(Manifest, Vec<CellRecord>)> {
    let mpath = resolve_manifest(path);
    let manifest = read_manifest(&mpath)?;
    let base = mpath.parent().unwrap_or(Path::new("."));
    let mut cells = Vec::with_capacity(manifest.cells.len());
    for c in &manifest.cells {
        if c.capacities_ah.len() != c.checkup_days.len() {
            return Err(Error::Data(format!("{}: capacity count does not match checkup days", c.cell_id)));
        }
        let spectra = c
            .spectra
            .iter()
            .map(|s| {
                Ok(SpectrumRecord {
                    day: s.day,
                    soc: s.soc,
                    spectrum: read_spectrum_csv(&base.join(&s.path))?,
                    truth: None,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        cells.push(CellRecord {
            cell_id: c.cell_id.clone(),
            condition: c.condition,
            nominal_capacity_ah: c.nominal_capacity_ah,
            checkup_days: c.checkup_days.clone(),
            capacities_ah: c.capacities_ah.clone(),
            spectra,
        });
    }
    Ok((manifest, cells))
}

/// One feature row per band: band resistance plus the most prominent peak
/// inside the band, if any.
pub fn feature_rows(cell_id: &str, day: Option<u32>, soc: Option<u32>, sol: &DrtSolution) -> Vec<Vec<String>> {
    let opt = |v: Option<u32>| v.map_or(String::new(), |v| v.to_string());
    let bands = band_resistances(sol);
    let peaks = find_peaks_default(sol);
    Band::ALL
        .iter()
        .map(|&band| {
            let top = peaks
                .iter()
                .filter(|p| p.band == band)
                .max_by(|a, b| a.prominence_ohm_per_decade.total_cmp(&b.prominence_ohm_per_decade));
            vec![
                cell_id.to_string(),
                opt(day),
                opt(soc),
                band.as_str().to_string(),
                bands.get(band).to_string(),
                top.map_or(String::new(), |p| p.tau_at_max_s.to_string()),
                top.map_or(String::new(), |p| p.height_ohm_per_s.to_string()),
            ]
        })
        .collect()
}

pub fn features_to_csv(rows: Vec<Vec<String>>) -> String {
    csv_string(&FEATURE_HEADER, rows)
}

pub fn history_to_csv(history: &[EpochRecord]) -> String {
    let rows = history.iter().map(|h| {
        vec![
            h.epoch.to_string(),
            h.train_mse.to_string(),
            h.val_mse.to_string(),
            h.lr.to_string(),
        ]
    });
    csv_string(&HISTORY_HEADER, rows)
}

pub fn results_to_csv(results: &[ExperimentResult]) -> String {
    let rows = results.iter().map(|r| {
        vec![
            r.category.as_str().to_string(),
            r.set.to_string(),
            r.model.as_str().to_string(),
            r.rmse_ah.to_string(),
            r.rmspe_pct.to_string(),
        ]
    });
    csv_string(&RESULTS_HEADER, rows)
}

/// One row per test-cell checkup; `days` maps a cell to its checkup days.
pub fn trajectories_to_csv<'a>(results: &[ExperimentResult], days: impl Fn(&str) -> Option<&'a [u32]>) -> Result<String> {
    let mut rows = Vec::new();
    for r in results {
        for t in &r.trajectories {
            let d = days(&t.cell_id).ok_or_else(|| Error::Data(format!("no checkup days for {}", t.cell_id)))?;
            if d.len() != t.true_soh.len() {
                return Err(Error::Data(format!("{}: checkup days do not match trajectory length", t.cell_id)));
            }
            for ((day, y), y_hat) in d.iter().zip(&t.true_soh).zip(&t.estimated_soh) {
                rows.push(vec![
                    r.category.as_str().to_string(),
                    r.set.to_string(),
                    r.model.as_str().to_string(),
                    t.cell_id.clone(),
                    day.to_string(),
                    y.to_string(),
                    y_hat.to_string(),
                ]);
            }
        }
    }
    Ok(csv_string(&TRAJECTORY_HEADER, rows))
}

/// Trained LSTM with everything needed to run it on raw DRT vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub schema_version: u32,
    pub model_config: ModelConfig,
    pub train_config: TrainConfig,
    pub normalizer: Normalizer,
    /// Name, offset and shape of each tensor inside `params` (row-major).
    pub layout: Vec<TensorInfo>,
    pub params: Vec<f64>,
    pub param_count: usize,
    pub train_cells: Vec<String>,
    pub val_cells: Vec<String>,
    pub best_epoch: usize,
    pub best_val_mse: f64,
    /// Split the model was trained under, when it came from one.
    pub split: Option<SplitSpec>,
    /// Fixed λ used for the input DRT fits; `None` means L-curve.
    #[serde(default)]
    pub input_lambda: Option<f64>,
}

impl Checkpoint {
    pub fn new(
        model: &SohModel,
        normalizer: &Normalizer,
        train_config: &TrainConfig,
        train_cells: Vec<String>,
        val_cells: Vec<String>,
        best_epoch: usize,
        best_val_mse: f64,
        split: Option<SplitSpec>,
    ) -> Self {
        Checkpoint {
            schema_version: SCHEMA_VERSION,
            model_config: model.config().clone(),
            train_config: train_config.clone(),
            normalizer: normalizer.clone(),
            layout: model.tensors().to_vec(),
            params: model.params().to_vec(),
            param_count: model.param_count(),
            train_cells,
            val_cells,
            best_epoch,
            best_val_mse,
            split,
            input_lambda: None,
        }
    }

    /// Rebuild the model, checking the stored layout against the config.
    pub fn model(&self) -> Result<SohModel> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Data(format!("checkpoint schema_version {} is not supported", self.schema_version)));
        }
        let model = SohModel::from_params(self.model_config.clone(), self.params.clone())?;
        if model.tensors() != self.layout.as_slice() {
            return Err(Error::Data("checkpoint layout does not match its model config".into()));
        }
        if self.normalizer.dim() != self.model_config.input_dim {
            return Err(Error::Data("checkpoint normalizer width does not match input_dim".into()));
        }
        Ok(model)
    }

    pub fn predict(&self, inputs: &[Vec<f64>]) -> Result<Vec<f64>> {
        self.model()?.predict(&self.normalizer.apply(inputs))
    }
}
