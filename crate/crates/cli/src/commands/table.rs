use std::path::PathBuf;

use clap::Args;
use drtsoh_core::eval::{cell_infos, default_experiments, run_set, ExperimentResult};
use drtsoh_core::io::{results_to_csv, trajectories_to_csv, write_text};

use super::train::TrainOpts;
use super::{init_jobs, load_samples, progress};
use crate::{CliError, CliResult, Common};

#[derive(Debug, Args)]
pub struct TableArgs {
    /// Dataset manifest or its directory.
    #[arg(long)]
    data: PathBuf,
    /// Output directory for results.csv and trajectories.csv.
    #[arg(long, short)]
    out: PathBuf,
    /// LSTM trainings per set; the median-RMSPE run is reported.
    #[arg(long, default_value_t = 3)]
    seeds: usize,
    /// Only run these set numbers (1-10), comma separated.
    #[arg(long, value_delimiter = ',')]
    sets: Vec<usize>,
    #[command(flatten)]
    opts: TrainOpts,
    #[command(flatten)]
    common: Common,
}

pub fn run(a: TableArgs) -> CliResult {
    init_jobs(&a.common)?;
    if a.seeds == 0 {
        return Err(CliError::usage("--seeds must be >= 1"));
    }
    let ds = load_samples(&a.data, a.opts.input_lambda())?;
    let infos = cell_infos(&ds.cells);
    let input_dim = ds.samples.first().map_or(0, |s| s.input_dim());
    let mc = a.opts.model_config(input_dim);
    let tc = a.opts.train_config(a.common.seed);
    let seeds: Vec<u64> = (0..a.seeds as u64).map(|i| a.common.seed.wrapping_add(i)).collect();

    let mut results: Vec<ExperimentResult> = Vec::new();
    for spec in default_experiments(a.common.seed) {
        if !a.sets.is_empty() && !a.sets.contains(&spec.set) {
            continue;
        }
        progress(&a.common, format!("set {}", spec.set));
        let out = run_set(&ds.samples, &infos, &spec, &mc, &tc, &seeds)?;
        let lstm = out.lstm_median().clone();
        println!(
            "set {:>2} {:<17} lstm RMSPE {:>7.3}%  linreg RMSPE {:>9.3}%",
            spec.set,
            out.split.category.as_str(),
            lstm.rmspe_pct,
            out.linreg.rmspe_pct
        );
        results.push(lstm);
        results.push(out.linreg);
    }
    if results.is_empty() {
        return Err(CliError::usage("--sets selected no experiment"));
    }
    write_text(&a.out.join("results.csv"), &results_to_csv(&results))?;
    let days = |id: &str| ds.cells.iter().find(|c| c.cell_id == id).map(|c| c.checkup_days.as_slice());
    write_text(&a.out.join("trajectories.csv"), &trajectories_to_csv(&results, days)?)?;
    println!("wrote {}", a.out.display());
    Ok(())
}
