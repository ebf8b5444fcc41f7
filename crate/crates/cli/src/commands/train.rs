use std::path::PathBuf;

use clap::{Args, ValueEnum};
use drtsoh_core::eval::{
    cell_infos, make_balanced_split, make_random_split, make_temperature_split, validation_cell, SplitSpec,
    DEFAULT_INPUT_LAMBDA, DEFAULT_RANDOM_K,
};
use drtsoh_core::io::{history_to_csv, write_json, write_text, Checkpoint};
use drtsoh_core::soh::{train, ModelConfig, SequenceSample, TrainConfig};
use drtsoh_core::synthetic::CellRecord;

use super::{init_jobs, load_samples, progress};
use crate::{CliError, CliResult, Common};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitKind {
    Balanced,
    Temperature,
    Random,
    /// Train on every cell; nothing held out for testing.
    None,
}

/// Options shared by every command that trains the LSTM.
#[derive(Debug, Args, Clone)]
pub struct TrainOpts {
    #[arg(long, default_value_t = TrainConfig::default().max_epochs)]
    pub epochs: usize,
    #[arg(long, default_value_t = TrainConfig::default().batch_size)]
    pub batch_size: usize,
    #[arg(long, default_value_t = TrainConfig::default().lr0)]
    pub lr0: f64,
    #[arg(long, default_value_t = TrainConfig::default().plateau_patience)]
    pub patience: usize,
    /// LSTM hidden widths, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = ModelConfig::default().lstm_hidden)]
    pub hidden: Vec<usize>,
    /// Fully connected widths, comma separated, ending in 1.
    #[arg(long, value_delimiter = ',', default_values_t = ModelConfig::default().fc_dims)]
    pub fc: Vec<usize>,
    /// Fixed λ for the input DRT fits.
    #[arg(long, default_value_t = DEFAULT_INPUT_LAMBDA)]
    pub lambda: f64,
    /// Pick the input λ per spectrum on the L-curve instead.
    #[arg(long, conflicts_with = "lambda")]
    pub lcurve: bool,
}

impl TrainOpts {
    pub fn input_lambda(&self) -> Option<f64> {
        (!self.lcurve).then_some(self.lambda)
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            max_epochs: self.epochs,
            batch_size: self.batch_size,
            lr0: self.lr0,
            plateau_patience: self.patience,
            seed,
            ..TrainConfig::default()
        }
    }

    pub fn model_config(&self, input_dim: usize) -> ModelConfig {
        ModelConfig {
            input_dim,
            lstm_hidden: self.hidden.clone(),
            fc_dims: self.fc.clone(),
            ..ModelConfig::default()
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset manifest or its directory.
    #[arg(long)]
    data: PathBuf,
    /// Output directory for checkpoint.json and history.csv.
    #[arg(long, short)]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = SplitKind::Balanced)]
    split: SplitKind,
    /// Held-out temperature for `--split temperature`.
    #[arg(long)]
    temp: Option<f64>,
    /// Held-out cell count for `--split random`.
    #[arg(long, default_value_t = DEFAULT_RANDOM_K)]
    k: usize,
    #[command(flatten)]
    opts: TrainOpts,
    #[command(flatten)]
    common: Common,
}

fn make_split(a: &TrainArgs, cells: &[CellRecord]) -> CliResult<Option<SplitSpec>> {
    let infos = cell_infos(cells);
    let split = match a.split {
        SplitKind::Balanced => make_balanced_split(&infos, a.common.seed)?,
        SplitKind::Temperature => {
            let t = a
                .temp
                .ok_or_else(|| CliError::usage("--split temperature needs --temp"))?;
            make_temperature_split(&infos, t)?
        }
        SplitKind::Random => make_random_split(&infos, a.k, a.common.seed)?,
        SplitKind::None => return Ok(None),
    };
    Ok(Some(split))
}

pub fn run(a: TrainArgs) -> CliResult {
    init_jobs(&a.common)?;
    let ds = load_samples(&a.data, a.opts.input_lambda())?;
    let split = make_split(&a, &ds.cells)?;
    let train_ids: Vec<String> = match &split {
        Some(s) => s.train_cell_ids.clone(),
        None => ds.cells.iter().map(|c| c.cell_id.clone()).collect(),
    };
    let val_id = validation_cell(&train_ids, a.common.seed)?.to_string();
    let (val, fit): (Vec<SequenceSample>, Vec<SequenceSample>) = ds
        .samples
        .iter()
        .filter(|s| train_ids.contains(&s.cell_id))
        .cloned()
        .partition(|s| s.cell_id == val_id);
    let tc = a.opts.train_config(a.common.seed);
    let input_dim = fit.first().map_or(0, SequenceSample::input_dim);
    let mc = a.opts.model_config(input_dim);
    progress(
        &a.common,
        format!("training on {} cells, validating on {val_id}", fit.len()),
    );
    let res = train(&fit, &val, &mc, &tc)?;
    let mut ckpt = Checkpoint::new(
        &res.model,
        &res.normalizer,
        &tc,
        fit.iter().map(|s| s.cell_id.clone()).collect(),
        vec![val_id],
        res.best_epoch,
        res.best_val_mse,
        split,
    );
    ckpt.input_lambda = a.opts.input_lambda();
    write_json(&a.out.join("checkpoint.json"), &ckpt)?;
    write_text(&a.out.join("history.csv"), &history_to_csv(&res.history))?;
    println!(
        "trained {} parameters for {} epochs (best epoch {}, val MSE {:.3e}); wrote {}",
        res.model.param_count(),
        res.history.len(),
        res.best_epoch,
        res.best_val_mse,
        a.out.display()
    );
    Ok(())
}
