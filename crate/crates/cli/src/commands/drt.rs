use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use clap::Args;
use drtsoh_core::drt::{fit_drt_with, FitOptions};
use drtsoh_core::eis::{build_tau_grid, ImpedanceSpectrum, TimeConstantGrid};
use drtsoh_core::io::{
    lcurve_to_csv, load_dataset, read_spectrum_csv, resolve_manifest, write_drt, write_text, DrtSidecar,
    SCHEMA_VERSION,
};
use rayon::prelude::*;

use super::{file_stem, init_jobs, is_csv, progress, require_exists};
use crate::{CliError, CliResult, Common, Mode};

#[derive(Debug, Args)]
pub struct DrtArgs {
    /// Spectrum CSVs, directories of them, or a dataset manifest/directory.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Output directory for `<name>.csv` + `<name>.json` per spectrum.
    #[arg(long, short)]
    out: PathBuf,
    /// Fixed regularization strength; skips the L-curve.
    #[arg(long)]
    lambda: Option<f64>,
    /// Directory for `<name>_lcurve.csv` tables (L-curve fits only).
    #[arg(long, value_name = "DIR")]
    lcurve_out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Mode::Real)]
    mode: Mode,
    /// τ points for standalone spectra (datasets use their own grid).
    #[arg(long, default_value_t = drtsoh_core::eis::DEFAULT_N_TAU)]
    n_tau: usize,
    #[arg(long, default_value_t = drtsoh_core::eis::DEFAULT_PAD_DECADES)]
    pad_decades: f64,
    /// Only fit dataset spectra at this SOC.
    #[arg(long)]
    soc: Option<u32>,
    #[command(flatten)]
    common: Common,
}

struct Job {
    name: String,
    source: String,
    spectrum: ImpedanceSpectrum,
    tau_grid: TimeConstantGrid,
    truth_r0: Option<f64>,
    truth_rp: Option<f64>,
}

fn is_dataset(p: &Path) -> bool {
    if p.is_dir() {
        p.join(drtsoh_core::io::MANIFEST_FILE).is_file()
    } else {
        p.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
    }
}

fn collect_jobs(a: &DrtArgs) -> CliResult<Vec<Job>> {
    let mut jobs = Vec::new();
    for input in &a.inputs {
        require_exists(input, "input")?;
        if is_dataset(input) {
            let mpath = resolve_manifest(input);
            let (manifest, cells) = load_dataset(&mpath)?;
            let tg = manifest.tau_grid()?;
            for (c, mc) in cells.iter().zip(&manifest.cells) {
                for (rec, ms) in c.spectra.iter().zip(&mc.spectra) {
                    if a.soc.is_some_and(|s| s != rec.soc) {
                        continue;
                    }
                    jobs.push(Job {
                        name: file_stem(Path::new(&ms.path)),
                        source: ms.path.clone(),
                        spectrum: rec.spectrum.clone(),
                        tau_grid: tg.clone(),
                        truth_r0: ms.truth_r0_ohm,
                        truth_rp: ms.truth_rp_ohm,
                    });
                }
            }
        } else {
            for f in super::expand_csv_inputs(std::slice::from_ref(input))? {
                if !is_csv(&f) {
                    return Err(CliError::usage(format!("{} is not a .csv spectrum", f.display())));
                }
                let spectrum = read_spectrum_csv(&f)?;
                let fg = spectrum.freq_grid();
                let tau_grid = build_tau_grid(fg.min_hz(), fg.max_hz(), a.n_tau, a.pad_decades)?;
                jobs.push(Job {
                    name: file_stem(&f),
                    source: f.display().to_string(),
                    spectrum,
                    tau_grid,
                    truth_r0: None,
                    truth_rp: None,
                });
            }
        }
    }
    let mut seen = BTreeSet::new();
    for j in &jobs {
        if !seen.insert(j.name.as_str()) {
            return Err(CliError::usage(format!("two inputs share the output name {}", j.name)));
        }
    }
    Ok(jobs)
}

pub fn run(a: DrtArgs) -> CliResult {
    init_jobs(&a.common)?;
    if let Some(l) = a.lambda {
        if !(l.is_finite() && l > 0.0) {
            return Err(CliError::usage(format!("--lambda must be positive, got {l}")));
        }
    }
    let jobs = collect_jobs(&a)?;
    if jobs.is_empty() {
        return Err(CliError::data("no spectra to fit"));
    }
    progress(&a.common, format!("fitting {} spectra", jobs.len()));
    let opts = FitOptions {
        lambda: a.lambda,
        mode: a.mode.into(),
        ..FitOptions::default()
    };
    let fits = jobs
        .par_iter()
        .map(|j| fit_drt_with(&j.spectrum, &j.tau_grid, &opts))
        .collect::<Vec<_>>();
    for (job, fit) in jobs.iter().zip(fits) {
        let fit = fit.map_err(|e| {
            let mut err = CliError::from(e);
            err.message = format!("{}: {}", job.source, err.message);
            err
        })?;
        let sol = &fit.solution;
        let sidecar = DrtSidecar {
            schema_version: SCHEMA_VERSION,
            source: job.source.clone(),
            mode: opts.mode,
            r0_ohm: sol.r0_ohm,
            rp_ohm: sol.rp_ohm,
            lambda: sol.lambda,
            lambda_source: if a.lambda.is_some() { "fixed" } else { "lcurve" }.into(),
            report: sol.report.clone(),
            truth_r0_ohm: job.truth_r0,
            truth_rp_ohm: job.truth_rp,
        };
        write_drt(&a.out.join(format!("{}.csv", job.name)), sol, &sidecar)?;
        if let (Some(dir), Some(points)) = (&a.lcurve_out, &fit.lcurve) {
            write_text(&dir.join(format!("{}_lcurve.csv", job.name)), &lcurve_to_csv(points))?;
        }
    }
    println!("wrote {} DRT fits to {}", jobs.len(), a.out.display());
    Ok(())
}
