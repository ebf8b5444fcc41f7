use std::path::PathBuf;

use clap::Args;
use drtsoh_core::io::write_dataset;
use drtsoh_core::synthetic::{gen_dataset, DatasetConfig};

use super::{init_jobs, progress};
use crate::{CliResult, Common};

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output directory (created if missing).
    #[arg(long, short)]
    out: PathBuf,
    /// Multiplicative noise σ on both impedance components.
    #[arg(long, default_value_t = 0.003)]
    noise: f64,
    #[arg(long, default_value_t = 1e-2)]
    f_min: f64,
    #[arg(long, default_value_t = 1e4)]
    f_max: f64,
    #[arg(long, default_value_t = 60)]
    n_freq: usize,
    #[arg(long, default_value_t = drtsoh_core::eis::DEFAULT_N_TAU)]
    n_tau: usize,
    #[arg(long, default_value_t = drtsoh_core::eis::DEFAULT_PAD_DECADES)]
    pad_decades: f64,
    #[command(flatten)]
    common: Common,
}

pub fn run(a: SynthArgs) -> CliResult {
    init_jobs(&a.common)?;
    let config = DatasetConfig {
        noise_sigma: a.noise,
        f_min_hz: a.f_min,
        f_max_hz: a.f_max,
        n_freq: a.n_freq,
        n_tau: a.n_tau,
        pad_decades: a.pad_decades,
        ..DatasetConfig::default()
    };
    progress(&a.common, format!("generating dataset with seed {}", a.common.seed));
    let cells = gen_dataset(&config, a.common.seed)?;
    let manifest = write_dataset(&a.out, &config, a.common.seed, &cells)?;
    println!(
        "wrote {} cells, {} spectra to {}",
        manifest.cells.len(),
        manifest.spectrum_count(),
        a.out.display()
    );
    Ok(())
}
