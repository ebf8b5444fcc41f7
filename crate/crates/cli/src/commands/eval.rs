use std::path::PathBuf;

use clap::Args;
use drtsoh_core::eval::{score_split, ModelKind};
use drtsoh_core::io::{read_json, results_to_csv, trajectories_to_csv, write_text, Checkpoint};
use drtsoh_core::soh::{LinearBaseline, SequenceSample};

use super::{init_jobs, load_samples, progress, require_exists};
use crate::{CliError, CliResult, Common};

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Dataset manifest or its directory.
    #[arg(long)]
    data: PathBuf,
    /// Checkpoint written by `train`.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Output directory for results.csv and trajectories.csv.
    #[arg(long, short)]
    out: PathBuf,
    /// Set number recorded in the results table.
    #[arg(long, default_value_t = 1)]
    set: usize,
    /// Skip the linear-regression comparison row.
    #[arg(long)]
    no_baseline: bool,
    /// Fixed λ for the input DRT fits; defaults to the checkpoint's.
    #[arg(long)]
    lambda: Option<f64>,
    #[command(flatten)]
    common: Common,
}

pub fn run(a: EvalArgs) -> CliResult {
    init_jobs(&a.common)?;
    require_exists(&a.checkpoint, "checkpoint")?;
    let ckpt: Checkpoint = read_json(&a.checkpoint)?;
    let model = ckpt.model()?;
    let split = ckpt
        .split
        .clone()
        .ok_or_else(|| CliError::data("checkpoint was trained without a held-out split; nothing to evaluate"))?;
    let ds = load_samples(&a.data, a.lambda.or(ckpt.input_lambda))?;
    progress(&a.common, format!("evaluating on {:?}", split.test_cell_ids));

    let lstm = |s: &SequenceSample| model.predict(&ckpt.normalizer.apply(&s.inputs));
    let mut results = vec![score_split(&ds.samples, &split, a.set, ModelKind::Lstm, &lstm)?];
    if !a.no_baseline {
        let train: Vec<SequenceSample> = ds
            .samples
            .iter()
            .filter(|s| ckpt.train_cells.contains(&s.cell_id) || ckpt.val_cells.contains(&s.cell_id))
            .cloned()
            .collect();
        let lb = LinearBaseline::fit(&train)?;
        let linreg = |s: &SequenceSample| lb.predict(&s.inputs);
        results.push(score_split(&ds.samples, &split, a.set, ModelKind::Linreg, &linreg)?);
    }

    write_text(&a.out.join("results.csv"), &results_to_csv(&results))?;
    let days = |id: &str| ds.cells.iter().find(|c| c.cell_id == id).map(|c| c.checkup_days.as_slice());
    write_text(&a.out.join("trajectories.csv"), &trajectories_to_csv(&results, days)?)?;
    for r in &results {
        println!(
            "{} set {} {}: RMSE {:.4} Ah, RMSPE {:.3}%",
            r.category, r.set, r.model, r.rmse_ah, r.rmspe_pct
        );
    }
    Ok(())
}
