//! Python bindings: grids, forward model, DRT fitting and features, the
//! synthetic dataset and the LSTM SOH model.

use drtsoh_core::drt::{fit_drt_with, FitMode, FitOptions};
use drtsoh_core::eis::{self, build_tau_grid, FrequencyGrid, ImpedanceSpectrum, TimeConstantGrid};
use drtsoh_core::error::Error;
use drtsoh_core::eval::{self, build_samples};
use drtsoh_core::features::{band_resistances, find_peaks_default, per_decade};
use drtsoh_core::io::{read_json, Checkpoint};
use drtsoh_core::soh::{self, ModelConfig, Normalizer, SequenceSample, TrainConfig};
use drtsoh_core::synthetic::{self, AgingKind, CellRecord, DatasetConfig};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn py_err(e: Error) -> PyErr {
    if e.is_numeric() {
        PyRuntimeError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

trait OrPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> OrPy<T> for drtsoh_core::error::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(py_err)
    }
}

/// Descending log-spaced frequencies in Hz.
#[pyfunction]
fn frequency_grid(f_min_hz: f64, f_max_hz: f64, n: usize) -> PyResult<Vec<f64>> {
    Ok(FrequencyGrid::log_spaced_descending(f_min_hz, f_max_hz, n).py()?.freqs_hz().to_vec())
}

/// Log-uniform τ grid covering `1/(2π f)` padded by `pad_decades` each side.
#[pyfunction]
#[pyo3(signature = (f_min_hz, f_max_hz, n_tau = eis::DEFAULT_N_TAU, pad_decades = eis::DEFAULT_PAD_DECADES))]
fn tau_grid(f_min_hz: f64, f_max_hz: f64, n_tau: usize, pad_decades: f64) -> PyResult<Vec<f64>> {
    Ok(build_tau_grid(f_min_hz, f_max_hz, n_tau, pad_decades).py()?.taus_s().to_vec())
}

/// Impedance `(z_real, z_imag)` of the distribution `g` (Ω per grid cell) on `taus`.
#[pyfunction]
fn forward_model(freqs_hz: Vec<f64>, taus_s: Vec<f64>, g_ohm: Vec<f64>, r0_ohm: f64) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let tg = TimeConstantGrid::from_taus(taus_s).py()?;
    let sol = eis::DrtSolution::new(tg, g_ohm, r0_ohm).py()?;
    let z = eis::forward_model(&sol, &FrequencyGrid::new(freqs_hz).py()?).py()?;
    Ok((z.z_real_ohm().to_vec(), z.z_imag_ohm().to_vec()))
}

#[pyclass(module = "drtsoh", name = "DrtSolution", skip_from_py_object)]
#[derive(Clone)]
struct PyDrtSolution(eis::DrtSolution);

#[pymethods]
impl PyDrtSolution {
    #[getter]
    fn taus(&self) -> Vec<f64> {
        self.0.tau_grid.taus_s().to_vec()
    }

    /// Resistance per grid cell (Ω).
    #[getter]
    fn g(&self) -> Vec<f64> {
        self.0.g_ohm.clone()
    }

    /// `g/δτ` (Ω/s).
    #[getter]
    fn density(&self) -> Vec<f64> {
        self.0.density()
    }

    /// `g` per decade of τ (Ω/decade).
    #[getter]
    fn per_decade(&self) -> Vec<f64> {
        per_decade(&self.0)
    }

    #[getter]
    fn r0_ohm(&self) -> f64 {
        self.0.r0_ohm
    }

    #[getter]
    fn rp_ohm(&self) -> f64 {
        self.0.rp_ohm
    }

    #[getter]
    fn lam(&self) -> Option<f64> {
        self.0.lambda
    }

    /// Solver diagnostics, or None.
    fn report<'py>(&self, py: Python<'py>) -> PyResult<Option<Bound<'py, PyDict>>> {
        let Some(r) = &self.0.report else { return Ok(None) };
        let d = PyDict::new(py);
        d.set_item("iterations", r.iterations)?;
        d.set_item("converged", r.converged)?;
        d.set_item("active_set_size", r.active_set_size)?;
        d.set_item("final_kkt_violation", r.final_kkt_violation)?;
        Ok(Some(d))
    }

    /// Peaks above the default prominence, as dicts.
    fn peaks<'py>(&self, py: Python<'py>) -> PyResult<Vec<Bound<'py, PyDict>>> {
        find_peaks_default(&self.0)
            .iter()
            .map(|p| {
                let d = PyDict::new(py);
                d.set_item("band", p.band.as_str())?;
                d.set_item("tau_at_max_s", p.tau_at_max_s)?;
                d.set_item("height_ohm_per_s", p.height_ohm_per_s)?;
                d.set_item("height_ohm_per_decade", p.height_ohm_per_decade)?;
                d.set_item("area_ohm", p.area_ohm)?;
                Ok(d)
            })
            .collect()
    }

    /// Resistance per τ band.
    fn band_resistances<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let d = PyDict::new(py);
        for (band, r) in band_resistances(&self.0).to_map() {
            d.set_item(band.as_str(), r)?;
        }
        Ok(d)
    }

    fn __repr__(&self) -> String {
        format!(
            "DrtSolution(n_tau={}, r0_ohm={:.6}, rp_ohm={:.6}, lam={:?})",
            self.0.g_ohm.len(),
            self.0.r0_ohm,
            self.0.rp_ohm,
            self.0.lambda
        )
    }
}

/// Fit a DRT. `lam=None` selects λ on the L-curve. The τ grid defaults to
/// one built from the frequency range.
#[pyfunction]
#[pyo3(signature = (freqs_hz, z_real, z_imag, lam = None, mode = "real", taus_s = None, n_tau = eis::DEFAULT_N_TAU, pad_decades = eis::DEFAULT_PAD_DECADES))]
#[allow(clippy::too_many_arguments)]
fn fit_drt(
    freqs_hz: Vec<f64>,
    z_real: Vec<f64>,
    z_imag: Vec<f64>,
    lam: Option<f64>,
    mode: &str,
    taus_s: Option<Vec<f64>>,
    n_tau: usize,
    pad_decades: f64,
) -> PyResult<PyDrtSolution> {
    let mode = match mode {
        "real" => FitMode::Real,
        "complex" => FitMode::Complex,
        other => return Err(PyValueError::new_err(format!("mode must be 'real' or 'complex', got {other:?}"))),
    };
    let fg = FrequencyGrid::new(freqs_hz).py()?;
    let tg = match taus_s {
        Some(t) => TimeConstantGrid::from_taus(t).py()?,
        None => build_tau_grid(fg.min_hz(), fg.max_hz(), n_tau, pad_decades).py()?,
    };
    let spectrum = ImpedanceSpectrum::new(fg, z_real, z_imag).py()?;
    let opts = FitOptions {
        lambda: lam,
        mode,
        ..FitOptions::default()
    };
    Ok(PyDrtSolution(fit_drt_with(&spectrum, &tg, &opts).py()?.solution))
}

#[pyfunction]
fn selu(x: f64) -> f64 {
    soh::selu(x)
}

#[pyfunction]
fn rmse(y: Vec<f64>, y_hat: Vec<f64>) -> PyResult<f64> {
    soh::rmse(&y, &y_hat).py()
}

/// Root mean squared percentage error, in percent.
#[pyfunction]
fn rmspe(y: Vec<f64>, y_hat: Vec<f64>) -> PyResult<f64> {
    soh::rmspe(&y, &y_hat).py()
}

#[pyclass(module = "drtsoh", name = "Cell")]
struct PyCell(CellRecord);

#[pymethods]
impl PyCell {
    #[getter]
    fn cell_id(&self) -> String {
        self.0.cell_id.clone()
    }

    #[getter]
    fn temperature_c(&self) -> f64 {
        self.0.condition.temperature_c
    }

    /// "calendar" or "cycling".
    #[getter]
    fn aging_kind(&self) -> &'static str {
        match self.0.condition.aging_kind {
            AgingKind::Calendar => "calendar",
            AgingKind::Cycling => "cycling",
        }
    }

    #[getter]
    fn days(&self) -> Vec<u32> {
        self.0.checkup_days.clone()
    }

    #[getter]
    fn capacities_ah(&self) -> Vec<f64> {
        self.0.capacities_ah.clone()
    }

    #[getter]
    fn soh(&self) -> Vec<f64> {
        self.0.soh()
    }

    /// `(freqs_hz, z_real, z_imag)` measured at `day` and `soc`.
    fn spectrum(&self, day: u32, soc: u32) -> PyResult<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let rec = self
            .0
            .spectrum(day, soc)
            .ok_or_else(|| PyValueError::new_err(format!("no spectrum at day {day}, SOC {soc}")))?;
        let s = &rec.spectrum;
        Ok((s.freq_grid().freqs_hz().to_vec(), s.z_real_ohm().to_vec(), s.z_imag_ohm().to_vec()))
    }

    /// Generating DRT at `day` and `soc`.
    fn truth(&self, day: u32, soc: u32) -> PyResult<Option<PyDrtSolution>> {
        let rec = self
            .0
            .spectrum(day, soc)
            .ok_or_else(|| PyValueError::new_err(format!("no spectrum at day {day}, SOC {soc}")))?;
        Ok(rec.truth.clone().map(PyDrtSolution))
    }

    fn __repr__(&self) -> String {
        format!(
            "Cell({}, {} at {} °C)",
            self.0.cell_id,
            self.aging_kind(),
            self.0.condition.temperature_c
        )
    }
}

/// The 22-cell synthetic aging dataset.
#[pyfunction]
#[pyo3(signature = (seed = 0, noise_sigma = 0.003))]
fn generate_dataset(py: Python<'_>, seed: u64, noise_sigma: f64) -> PyResult<Vec<PyCell>> {
    let cfg = DatasetConfig {
        noise_sigma,
        ..DatasetConfig::default()
    };
    let cells = py.detach(|| synthetic::gen_dataset(&cfg, seed)).py()?;
    Ok(cells.into_iter().map(PyCell).collect())
}

type Sample = (String, Vec<Vec<f64>>, Vec<f64>);

/// One `(cell_id, inputs, targets)` sequence per cell: per-decade DRT at 25 %
/// SOC for each checkup, and SOH. `lam=None` picks λ per spectrum on the
/// L-curve.
#[pyfunction]
#[pyo3(signature = (cells, lam = Some(eval::DEFAULT_INPUT_LAMBDA)))]
fn build_sequences(py: Python<'_>, cells: Vec<PyRef<'_, PyCell>>, lam: Option<f64>) -> PyResult<Vec<Sample>> {
    let records: Vec<CellRecord> = cells.iter().map(|c| c.0.clone()).collect();
    let tg = DatasetConfig::default().tau_grid().py()?;
    let samples = py.detach(|| build_samples(&records, &tg, lam)).py()?;
    Ok(samples.into_iter().map(|s| (s.cell_id, s.inputs, s.targets)).collect())
}

fn to_samples(v: Vec<Sample>) -> PyResult<Vec<SequenceSample>> {
    v.into_iter()
        .map(|(id, x, y)| SequenceSample::new(id, x, y).py())
        .collect()
}

/// LSTM SOH estimator. Predictions pass inputs through the training
/// normalizer when the model has one.
#[pyclass(module = "drtsoh", name = "SohModel")]
struct PySohModel {
    model: soh::SohModel,
    normalizer: Option<Normalizer>,
}

#[pymethods]
impl PySohModel {
    #[new]
    #[pyo3(signature = (input_dim = 81, lstm_hidden = vec![128, 96, 64], fc_dims = vec![64, 32, 1], seed = 0))]
    fn new(input_dim: usize, lstm_hidden: Vec<usize>, fc_dims: Vec<usize>, seed: u64) -> PyResult<Self> {
        let config = model_config(input_dim, lstm_hidden, fc_dims)?;
        Ok(PySohModel {
            model: soh::SohModel::init(config, seed).py()?,
            normalizer: None,
        })
    }

    /// The 449-parameter configuration used for gradient checks.
    #[staticmethod]
    #[pyo3(signature = (seed = 0))]
    fn tiny(seed: u64) -> PyResult<Self> {
        Ok(PySohModel {
            model: soh::SohModel::init(ModelConfig::tiny(), seed).py()?,
            normalizer: None,
        })
    }

    /// Load a checkpoint written by `drtsoh train`.
    #[staticmethod]
    fn load(path: std::path::PathBuf) -> PyResult<Self> {
        let ckpt: Checkpoint = read_json(&path).py()?;
        Ok(PySohModel {
            model: ckpt.model().py()?,
            normalizer: Some(ckpt.normalizer),
        })
    }

    #[getter]
    fn param_count(&self) -> usize {
        self.model.param_count()
    }

    #[getter]
    fn params(&self) -> Vec<f64> {
        self.model.params().to_vec()
    }

    /// `(name, offset, rows, cols)` per tensor in the flat parameter vector.
    #[getter]
    fn layout(&self) -> Vec<(String, usize, usize, usize)> {
        self.model
            .tensors()
            .iter()
            .map(|t| (t.name.clone(), t.offset, t.rows, t.cols))
            .collect()
    }

    #[getter]
    fn normalized(&self) -> bool {
        self.normalizer.is_some()
    }

    /// SOH estimate per step for a `T × input_dim` sequence.
    fn predict(&self, inputs: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
        match &self.normalizer {
            Some(n) => {
                if inputs.iter().any(|r| r.len() != n.dim()) {
                    return Err(PyValueError::new_err(format!("every input row needs {} values", n.dim())));
                }
                self.model.predict(&n.apply(&inputs)).py()
            }
            None => self.model.predict(&inputs).py(),
        }
    }

    fn __repr__(&self) -> String {
        let c = self.model.config();
        format!(
            "SohModel(input_dim={}, lstm_hidden={:?}, fc_dims={:?}, params={})",
            c.input_dim,
            c.lstm_hidden,
            c.fc_dims,
            self.model.param_count()
        )
    }
}

fn model_config(input_dim: usize, lstm_hidden: Vec<usize>, fc_dims: Vec<usize>) -> PyResult<ModelConfig> {
    let config = ModelConfig {
        input_dim,
        lstm_hidden,
        fc_dims,
        ..ModelConfig::default()
    };
    config.validate().py()?;
    Ok(config)
}

/// Train on `(cell_id, inputs, targets)` sequences; returns the model (with
/// its normalizer) and the per-epoch history as dicts.
#[pyfunction]
#[pyo3(signature = (train, val, epochs = 300, batch_size = 4, lr0 = 1e-3, seed = 0, lstm_hidden = vec![128, 96, 64], fc_dims = vec![64, 32, 1]))]
#[allow(clippy::too_many_arguments)]
fn train<'py>(
    py: Python<'py>,
    train: Vec<Sample>,
    val: Vec<Sample>,
    epochs: usize,
    batch_size: usize,
    lr0: f64,
    seed: u64,
    lstm_hidden: Vec<usize>,
    fc_dims: Vec<usize>,
) -> PyResult<(PySohModel, Vec<Bound<'py, PyDict>>)> {
    let (train, val) = (to_samples(train)?, to_samples(val)?);
    let dim = train.first().map_or(0, SequenceSample::input_dim);
    let mc = model_config(dim, lstm_hidden, fc_dims)?;
    let tc = TrainConfig {
        max_epochs: epochs,
        batch_size,
        lr0,
        seed,
        ..TrainConfig::default()
    };
    let res = py.detach(|| soh::train(&train, &val, &mc, &tc)).py()?;
    let history = res
        .history
        .iter()
        .map(|e| {
            let d = PyDict::new(py);
            d.set_item("epoch", e.epoch)?;
            d.set_item("train_mse", e.train_mse)?;
            d.set_item("val_mse", e.val_mse)?;
            d.set_item("lr", e.lr)?;
            Ok(d)
        })
        .collect::<PyResult<Vec<_>>>()?;
    Ok((
        PySohModel {
            model: res.model,
            normalizer: Some(res.normalizer),
        },
        history,
    ))
}

#[pymodule]
fn drtsoh(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(frequency_grid, m)?)?;
    m.add_function(wrap_pyfunction!(tau_grid, m)?)?;
    m.add_function(wrap_pyfunction!(forward_model, m)?)?;
    m.add_function(wrap_pyfunction!(fit_drt, m)?)?;
    m.add_function(wrap_pyfunction!(selu, m)?)?;
    m.add_function(wrap_pyfunction!(rmse, m)?)?;
    m.add_function(wrap_pyfunction!(rmspe, m)?)?;
    m.add_function(wrap_pyfunction!(generate_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(build_sequences, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_class::<PyDrtSolution>()?;
    m.add_class::<PyCell>()?;
    m.add_class::<PySohModel>()?;
    m.add("NOMINAL_CAPACITY_AH", synthetic::NOMINAL_CAPACITY_AH)?;
    Ok(())
}
