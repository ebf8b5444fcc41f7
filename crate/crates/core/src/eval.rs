//! Train/test splits in three categories, paired LSTM and linear-baseline
//! experiments, and the results matrix.

use std::collections::BTreeSet;
use std::fmt;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::drt::fit_drt;
use crate::eis::TimeConstantGrid;
use crate::error::{Error, Result};
use crate::features::per_decade;
use crate::soh::{rmse, rmspe, train, LinearBaseline, ModelConfig, SequenceSample, TrainConfig};
use crate::synthetic::{mix_seed, AgingKind, CellRecord, NOMINAL_CAPACITY_AH, TEMPERATURES_C};

/// SOC at which checkup spectra are turned into model inputs.
pub const INPUT_SOC: u32 = 25;
/// Fixed λ for the DRT fits that feed the SOH models. Per-spectrum L-curve
/// choices drift between checkups and show up as input noise.
pub const DEFAULT_INPUT_LAMBDA: f64 = 0.1;
pub const DEFAULT_RANDOM_K: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitCategory {
    Balanced,
    TemperatureBased,
    Randomized,
}

impl SplitCategory {
    pub fn as_str(&self) -> &'static str {
        match self {
            SplitCategory::Balanced => "balanced",
            SplitCategory::TemperatureBased => "temperature_based",
            SplitCategory::Randomized => "randomized",
        }
    }
}

impl fmt::Display for SplitCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// What a split needs to know about a cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellInfo {
    pub cell_id: String,
    pub temperature_c: f64,
    pub aging_kind: AgingKind,
}

impl From<&CellRecord> for CellInfo {
    fn from(c: &CellRecord) -> Self {
        CellInfo {
            cell_id: c.cell_id.clone(),
            temperature_c: c.condition.temperature_c,
            aging_kind: c.condition.aging_kind,
        }
    }
}

pub fn cell_infos(cells: &[CellRecord]) -> Vec<CellInfo> {
    cells.iter().map(CellInfo::from).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub category: SplitCategory,
    pub test_cell_ids: Vec<String>,
    pub train_cell_ids: Vec<String>,
    pub seed: u64,
}

impl SplitSpec {
    /// Partition `cells` into the given test set and its complement,
    /// preserving dataset order on both sides.
    fn partition(category: SplitCategory, cells: &[CellInfo], test: &BTreeSet<&str>, seed: u64) -> Result<Self> {
        let mut test_cell_ids = Vec::new();
        let mut train_cell_ids = Vec::new();
        for c in cells {
            if test.contains(c.cell_id.as_str()) {
                test_cell_ids.push(c.cell_id.clone());
            } else {
                train_cell_ids.push(c.cell_id.clone());
            }
        }
        let spec = SplitSpec {
            category,
            test_cell_ids,
            train_cell_ids,
            seed,
        };
        spec.check_partition(cells)?;
        Ok(spec)
    }

    /// Disjoint, non-empty, and covering exactly the given cells.
    pub fn check_partition(&self, cells: &[CellInfo]) -> Result<()> {
        if self.test_cell_ids.is_empty() || self.train_cell_ids.is_empty() {
            return Err(Error::Split(format!(
                "{} split needs non-empty train and test sets (train {}, test {})",
                self.category,
                self.train_cell_ids.len(),
                self.test_cell_ids.len()
            )));
        }
        let mut seen = BTreeSet::new();
        for id in self.test_cell_ids.iter().chain(&self.train_cell_ids) {
            if !seen.insert(id.as_str()) {
                return Err(Error::Split(format!("cell {id} appears twice in split")));
            }
        }
        let all: BTreeSet<&str> = cells.iter().map(|c| c.cell_id.as_str()).collect();
        if seen != all {
            return Err(Error::Split("split does not cover exactly the dataset cells".into()));
        }
        Ok(())
    }
}

fn check_unique(cells: &[CellInfo]) -> Result<()> {
    let mut seen = BTreeSet::new();
    for c in cells {
        if !seen.insert(c.cell_id.as_str()) {
            return Err(Error::Split(format!("duplicate cell id {}", c.cell_id)));
        }
    }
    Ok(())
}

/// One cycling cell from each of 0, 25 and 40 °C plus one calendar cell.
pub fn make_balanced_split(cells: &[CellInfo], seed: u64) -> Result<SplitSpec> {
    check_unique(cells)?;
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[seed, 0xBA1A]));
    let mut test = BTreeSet::new();
    for t in TEMPERATURES_C {
        let pool: Vec<&CellInfo> = cells
            .iter()
            .filter(|c| c.aging_kind == AgingKind::Cycling && c.temperature_c == t)
            .collect();
        let pick = pool
            .choose(&mut rng)
            .ok_or_else(|| Error::Split(format!("no cycling cell at {t} °C for a balanced split")))?;
        test.insert(pick.cell_id.as_str());
    }
    let calendar: Vec<&CellInfo> = cells.iter().filter(|c| c.aging_kind == AgingKind::Calendar).collect();
    let pick = calendar
        .choose(&mut rng)
        .ok_or_else(|| Error::Split("no calendar cell for a balanced split".into()))?;
    test.insert(pick.cell_id.as_str());
    SplitSpec::partition(SplitCategory::Balanced, cells, &test, seed)
}

/// Every cell at `temp_c`, calendar and cycling, is held out.
pub fn make_temperature_split(cells: &[CellInfo], temp_c: f64) -> Result<SplitSpec> {
    check_unique(cells)?;
    if !TEMPERATURES_C.contains(&temp_c) {
        return Err(Error::Split(format!(
            "temperature {temp_c} °C is not one of {TEMPERATURES_C:?}"
        )));
    }
    let test: BTreeSet<&str> = cells
        .iter()
        .filter(|c| c.temperature_c == temp_c)
        .map(|c| c.cell_id.as_str())
        .collect();
    if test.is_empty() {
        return Err(Error::Split(format!("no cells at {temp_c} °C")));
    }
    SplitSpec::partition(SplitCategory::TemperatureBased, cells, &test, 0)
}

/// A uniformly drawn `k`-subset is held out.
pub fn make_random_split(cells: &[CellInfo], k: usize, seed: u64) -> Result<SplitSpec> {
    check_unique(cells)?;
    if k == 0 || k >= cells.len() {
        return Err(Error::Split(format!(
            "random split needs 1 <= k < {} cells, got k={k}",
            cells.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[seed, 0x4A4D]));
    let mut idx: Vec<usize> = (0..cells.len()).collect();
    idx.shuffle(&mut rng);
    let test: BTreeSet<&str> = idx[..k].iter().map(|&i| cells[i].cell_id.as_str()).collect();
    SplitSpec::partition(SplitCategory::Randomized, cells, &test, seed)
}

/// Recipe for one row group of the results matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SplitRecipe {
    Balanced { seed: u64 },
    Temperature { temp_c: f64 },
    Random { k: usize, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    /// 1-based set number in the results matrix.
    pub set: usize,
    pub recipe: SplitRecipe,
}

impl ExperimentSpec {
    pub fn split(&self, cells: &[CellInfo]) -> Result<SplitSpec> {
        match self.recipe {
            SplitRecipe::Balanced { seed } => make_balanced_split(cells, seed),
            SplitRecipe::Temperature { temp_c } => make_temperature_split(cells, temp_c),
            SplitRecipe::Random { k, seed } => make_random_split(cells, k, seed),
        }
    }
}

/// Ten sets: three balanced, one per temperature, three random 4-cell
/// holdouts and one half/half random split.
pub fn default_experiments(master_seed: u64) -> Vec<ExperimentSpec> {
    let s = |i: u64| mix_seed(&[master_seed, i]);
    let recipes = [
        SplitRecipe::Balanced { seed: s(1) },
        SplitRecipe::Balanced { seed: s(2) },
        SplitRecipe::Balanced { seed: s(3) },
        SplitRecipe::Temperature { temp_c: 0.0 },
        SplitRecipe::Temperature { temp_c: 25.0 },
        SplitRecipe::Temperature { temp_c: 40.0 },
        SplitRecipe::Random { k: DEFAULT_RANDOM_K, seed: s(7) },
        SplitRecipe::Random { k: DEFAULT_RANDOM_K, seed: s(8) },
        SplitRecipe::Random { k: DEFAULT_RANDOM_K, seed: s(9) },
        SplitRecipe::Random { k: 11, seed: s(10) },
    ];
    recipes
        .into_iter()
        .enumerate()
        .map(|(i, recipe)| ExperimentSpec { set: i + 1, recipe })
        .collect()
}

/// DRT-per-decade vectors at `INPUT_SOC` for every checkup, one sequence per
/// cell, with SOH targets. Cells are fitted in parallel; output order
/// follows `cells`.
pub fn build_samples(
    cells: &[CellRecord],
    tg: &TimeConstantGrid,
    lambda: Option<f64>,
) -> Result<Vec<SequenceSample>> {
    cells
        .par_iter()
        .map(|cell| {
            let mut inputs = Vec::with_capacity(cell.checkup_days.len());
            for &day in &cell.checkup_days {
                let rec = cell.spectrum(day, INPUT_SOC).ok_or_else(|| {
                    Error::Data(format!("{}: no spectrum for day {day} at {INPUT_SOC}% SOC", cell.cell_id))
                })?;
                let sol = fit_drt(&rec.spectrum, tg, lambda)?;
                inputs.push(per_decade(&sol));
            }
            SequenceSample::new(cell.cell_id.clone(), inputs, cell.soh())
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Lstm,
    Linreg,
}

impl ModelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::Lstm => "lstm",
            ModelKind::Linreg => "linreg",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub cell_id: String,
    pub step: Vec<usize>,
    pub true_soh: Vec<f64>,
    pub estimated_soh: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub category: SplitCategory,
    pub set: usize,
    pub model: ModelKind,
    pub rmse_ah: f64,
    pub rmspe_pct: f64,
    pub trajectories: Vec<Trajectory>,
}

fn select<'a>(samples: &'a [SequenceSample], ids: &[String]) -> Result<Vec<&'a SequenceSample>> {
    ids.iter()
        .map(|id| {
            samples
                .iter()
                .find(|s| &s.cell_id == id)
                .ok_or_else(|| Error::Split(format!("cell {id} has no sample")))
        })
        .collect()
}

/// The training cell held out for validation in an LSTM run.
pub fn validation_cell(train_cell_ids: &[String], seed: u64) -> Result<&str> {
    if train_cell_ids.len() < 2 {
        return Err(Error::Split("need at least two training cells to hold one out for validation".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[seed, 0x7A1]));
    Ok(train_cell_ids.choose(&mut rng).expect("non-empty").as_str())
}

/// Train on the split's training cells, then score per-checkup SOH on its
/// test cells. RMSE is reported in Ah against the nominal capacity.
pub fn run_experiment(
    samples: &[SequenceSample],
    split: &SplitSpec,
    set: usize,
    kind: ModelKind,
    model_config: &ModelConfig,
    tc: &TrainConfig,
) -> Result<ExperimentResult> {
    let train_s = select(samples, &split.train_cell_ids)?;

    let predict: Box<dyn Fn(&SequenceSample) -> Result<Vec<f64>>> = match kind {
        ModelKind::Lstm => {
            let val_id = validation_cell(&split.train_cell_ids, tc.seed)?;
            let (val, fit): (Vec<SequenceSample>, Vec<SequenceSample>) = train_s
                .iter()
                .map(|s| (*s).clone())
                .partition(|s| s.cell_id == val_id);
            let trained = train(&fit, &val, model_config, tc)?;
            Box::new(move |s| trained.predict(&s.inputs))
        }
        ModelKind::Linreg => {
            let fit: Vec<SequenceSample> = train_s.iter().map(|s| (*s).clone()).collect();
            let lb = LinearBaseline::fit(&fit)?;
            Box::new(move |s| lb.predict(&s.inputs))
        }
    };

    score_split(samples, split, set, kind, &*predict)
}

/// Score any predictor on the split's test cells.
pub fn score_split(
    samples: &[SequenceSample],
    split: &SplitSpec,
    set: usize,
    kind: ModelKind,
    predict: &dyn Fn(&SequenceSample) -> Result<Vec<f64>>,
) -> Result<ExperimentResult> {
    let test_s = select(samples, &split.test_cell_ids)?;
    let mut y = Vec::new();
    let mut y_hat = Vec::new();
    let mut trajectories = Vec::with_capacity(test_s.len());
    for s in test_s {
        let est = predict(s)?;
        if est.len() != s.len() {
            return Err(Error::Data(format!("{}: predictor returned {} steps, expected {}", s.cell_id, est.len(), s.len())));
        }
        y.extend_from_slice(&s.targets);
        y_hat.extend_from_slice(&est);
        trajectories.push(Trajectory {
            cell_id: s.cell_id.clone(),
            step: (0..s.len()).collect(),
            true_soh: s.targets.clone(),
            estimated_soh: est,
        });
    }
    Ok(ExperimentResult {
        category: split.category,
        set,
        model: kind,
        rmse_ah: rmse(&y, &y_hat)? * NOMINAL_CAPACITY_AH,
        rmspe_pct: rmspe(&y, &y_hat)?,
        trajectories,
    })
}

/// One set of the results matrix: the LSTM trained once per seed and the
/// linear baseline trained once.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetOutcome {
    pub spec: ExperimentSpec,
    pub split: SplitSpec,
    pub lstm_runs: Vec<ExperimentResult>,
    pub linreg: ExperimentResult,
}

impl SetOutcome {
    /// The LSTM run with the median RMSPE (lower middle for even counts).
    pub fn lstm_median(&self) -> &ExperimentResult {
        let mut order: Vec<&ExperimentResult> = self.lstm_runs.iter().collect();
        order.sort_by(|a, b| a.rmspe_pct.total_cmp(&b.rmspe_pct));
        order[(order.len() - 1) / 2]
    }
}

/// Run one experiment spec for every training seed. `tc.seed` is replaced
/// by each entry of `seeds`.
pub fn run_set(
    samples: &[SequenceSample],
    cells: &[CellInfo],
    spec: &ExperimentSpec,
    model_config: &ModelConfig,
    tc: &TrainConfig,
    seeds: &[u64],
) -> Result<SetOutcome> {
    if seeds.is_empty() {
        return Err(Error::arg("need at least one training seed"));
    }
    let split = spec.split(cells)?;
    let lstm_runs = seeds
        .iter()
        .map(|&seed| {
            let tc = TrainConfig { seed, ..tc.clone() };
            run_experiment(samples, &split, spec.set, ModelKind::Lstm, model_config, &tc)
        })
        .collect::<Result<Vec<_>>>()?;
    let linreg = run_experiment(samples, &split, spec.set, ModelKind::Linreg, model_config, tc)?;
    Ok(SetOutcome {
        spec: *spec,
        split,
        lstm_runs,
        linreg,
    })
}
