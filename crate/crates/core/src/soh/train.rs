use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{Adam, AdamConfig};
use super::model::{ModelConfig, SohModel};
use super::schedule::PlateauScheduler;
use crate::error::{Error, Result};

/// Features whose training-split spread falls below this are divided by it
/// instead, so constant columns map to zero rather than blowing up.
pub const STD_FLOOR: f64 = 1e-8;

/// Upper bound accepted for SOH targets.
pub const MAX_SOH: f64 = 1.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr0: f64,
    pub plateau_factor: f64,
    pub plateau_patience: usize,
    pub plateau_min_delta: f64,
    pub adam: AdamConfig,
    pub max_epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr0: 1e-3,
            plateau_factor: 0.5,
            plateau_patience: 10,
            plateau_min_delta: 1e-6,
            adam: AdamConfig::default(),
            max_epochs: 300,
            batch_size: 4,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.plateau_factor > 0.0 && self.plateau_factor < 1.0) {
            return Err(Error::Config(format!(
                "plateau_factor must lie in (0, 1), got {}",
                self.plateau_factor
            )));
        }
        if self.max_epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("max_epochs and batch_size must be >= 1".into()));
        }
        if !(self.lr0 > 0.0 && self.lr0.is_finite()) {
            return Err(Error::Config(format!("lr0 must be positive, got {}", self.lr0)));
        }
        Ok(())
    }
}

/// One cell's checkup sequence: DRT vectors in, SOH fractions out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceSample {
    pub cell_id: String,
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
}

impl SequenceSample {
    pub fn new(cell_id: impl Into<String>, inputs: Vec<Vec<f64>>, targets: Vec<f64>) -> Result<Self> {
        let s = SequenceSample {
            cell_id: cell_id.into(),
            inputs,
            targets,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.first().map_or(0, Vec::len)
    }

    pub fn validate(&self) -> Result<()> {
        if self.targets.is_empty() || self.inputs.len() != self.targets.len() {
            return Err(Error::arg(format!(
                "{}: need one input row per target and at least one step",
                self.cell_id
            )));
        }
        let d = self.input_dim();
        if d == 0 || self.inputs.iter().any(|r| r.len() != d) {
            return Err(Error::arg(format!("{}: ragged input rows", self.cell_id)));
        }
        if self.inputs.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::arg(format!("{}: non-finite input", self.cell_id)));
        }
        if let Some(t) = self.targets.iter().find(|t| !(**t > 0.0 && **t <= MAX_SOH)) {
            return Err(Error::arg(format!(
                "{}: SOH target {t} outside (0, {MAX_SOH}]",
                self.cell_id
            )));
        }
        Ok(())
    }
}

/// Per-feature centering with one shared scale, the root of the summed
/// feature variances. Keeps the relative size of DRT features, so near-empty
/// bands are not blown up to unit variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Normalizer {
    /// Statistics pooled over every step of every sample given.
    pub fn fit(samples: &[SequenceSample]) -> Result<Self> {
        let d = samples
            .first()
            .ok_or_else(|| Error::arg("cannot fit a normalizer on zero samples"))?
            .input_dim();
        let rows: Vec<&Vec<f64>> = samples.iter().flat_map(|s| &s.inputs).collect();
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::arg("samples have different input widths"));
        }
        let n = rows.len() as f64;
        let mut mean = vec![0.0; d];
        for r in &rows {
            for (m, v) in mean.iter_mut().zip(r.iter()) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for r in &rows {
            for ((s, v), m) in var.iter_mut().zip(r.iter()).zip(&mean) {
                *s += (v - m).powi(2);
            }
        }
        let total = (var.iter().sum::<f64>() / n).sqrt().max(STD_FLOOR);
        let std = vec![total; d];
        Ok(Normalizer { mean, std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, inputs: &[Vec<f64>]) -> Vec<Vec<f64>> {
        inputs
            .iter()
            .map(|r| {
                r.iter()
                    .zip(&self.mean)
                    .zip(&self.std)
                    .map(|((v, m), s)| (v - m) / s)
                    .collect()
            })
            .collect()
    }

    fn apply_sample(&self, s: &SequenceSample) -> SequenceSample {
        SequenceSample {
            cell_id: s.cell_id.clone(),
            inputs: self.apply(&s.inputs),
            targets: s.targets.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_mse: f64,
    pub val_mse: f64,
    pub lr: f64,
}

/// A trained network together with the input statistics it expects.
#[derive(Debug, Clone)]
pub struct TrainResult {
    pub model: SohModel,
    pub normalizer: Normalizer,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_mse: f64,
}

impl TrainResult {
    /// SOH per step for raw (unnormalized) inputs.
    pub fn predict(&self, inputs: &[Vec<f64>]) -> Result<Vec<f64>> {
        self.model.predict(&self.normalizer.apply(inputs))
    }
}

/// Mean over samples of each sample's per-step MSE. Inputs are used as given.
pub fn batch_mse(model: &SohModel, samples: &[SequenceSample]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::arg("no samples to evaluate"));
    }
    let mut total = 0.0;
    for s in samples {
        let y = model.predict(&s.inputs)?;
        total += y.iter().zip(&s.targets).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / s.len() as f64;
    }
    Ok(total / samples.len() as f64)
}

/// `batch_mse` after normalizing raw inputs.
pub fn evaluate_mse(model: &SohModel, normalizer: &Normalizer, samples: &[SequenceSample]) -> Result<f64> {
    let normed: Vec<SequenceSample> = samples.iter().map(|s| normalizer.apply_sample(s)).collect();
    batch_mse(model, &normed)
}

fn check_split(train: &[SequenceSample], val: &[SequenceSample], d: usize) -> Result<()> {
    if train.is_empty() {
        return Err(Error::arg("training split is empty"));
    }
    if val.is_empty() {
        return Err(Error::arg("validation split is empty"));
    }
    let mut seen = BTreeSet::new();
    for s in train {
        s.validate()?;
        if !seen.insert(s.cell_id.as_str()) {
            return Err(Error::arg(format!("cell {} appears twice in training split", s.cell_id)));
        }
    }
    for s in val {
        s.validate()?;
        if seen.contains(s.cell_id.as_str()) {
            return Err(Error::arg(format!("cell {} is in both train and validation", s.cell_id)));
        }
    }
    if let Some(s) = train.iter().chain(val).find(|s| s.input_dim() != d) {
        return Err(Error::arg(format!(
            "{}: input width {} does not match model input_dim {d}",
            s.cell_id,
            s.input_dim()
        )));
    }
    Ok(())
}

/// Minibatch Adam on MSE with a plateau schedule driven by validation loss.
/// Normalization statistics come from `train` alone, and the returned model
/// carries the parameters from the epoch with the lowest validation loss.
pub fn train(
    train: &[SequenceSample],
    val: &[SequenceSample],
    model_config: &ModelConfig,
    tc: &TrainConfig,
) -> Result<TrainResult> {
    tc.validate()?;
    model_config.validate()?;
    check_split(train, val, model_config.input_dim)?;

    let normalizer = Normalizer::fit(train)?;
    let train_n: Vec<SequenceSample> = train.iter().map(|s| normalizer.apply_sample(s)).collect();
    let val_n: Vec<SequenceSample> = val.iter().map(|s| normalizer.apply_sample(s)).collect();

    let mut model = SohModel::init(model_config.clone(), tc.seed)?;
    let mut adam = Adam::new(model.param_count(), tc.adam)?;
    let mut sched = PlateauScheduler::new(tc.lr0, tc.plateau_factor, tc.plateau_patience, tc.plateau_min_delta)?;
    let mut rng = ChaCha8Rng::seed_from_u64(tc.seed ^ 0x5348_5546_464c_4521);

    let mut order: Vec<usize> = (0..train_n.len()).collect();
    let mut grad = vec![0.0; model.param_count()];
    let mut history = Vec::with_capacity(tc.max_epochs);
    let mut best_params = model.params().to_vec();
    let mut best_val = f64::INFINITY;
    let mut best_epoch = 0;
    let mut lr = tc.lr0;

    for epoch in 1..=tc.max_epochs {
        order.shuffle(&mut rng);
        let mut train_sum = 0.0;
        for batch in order.chunks(tc.batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let inv_b = 1.0 / batch.len() as f64;
            for &i in batch {
                let s = &train_n[i];
                let (y, cache) = model.forward(&s.inputs)?;
                let inv_t = 1.0 / s.len() as f64;
                let dy: Vec<f64> = y
                    .iter()
                    .zip(&s.targets)
                    .map(|(a, b)| 2.0 * (a - b) * inv_t * inv_b)
                    .collect();
                train_sum += y.iter().zip(&s.targets).map(|(a, b)| (a - b).powi(2)).sum::<f64>() * inv_t;
                model.backward_accumulate(&cache, &dy, &mut grad);
            }
            adam.step(model.params_mut(), &grad, lr);
        }
        if model.params().iter().any(|p| !p.is_finite()) {
            return Err(Error::Data(format!("training diverged at epoch {epoch}")));
        }
        let train_mse = train_sum / train_n.len() as f64;
        let val_mse = batch_mse(&model, &val_n)?;
        history.push(EpochRecord {
            epoch,
            train_mse,
            val_mse,
            lr,
        });
        if val_mse < best_val {
            best_val = val_mse;
            best_epoch = epoch;
            best_params.copy_from_slice(model.params());
        }
        lr = sched.step(val_mse);
    }

    model.params_mut().copy_from_slice(&best_params);
    Ok(TrainResult {
        model,
        normalizer,
        history,
        best_epoch,
        best_val_mse: best_val,
    })
}
