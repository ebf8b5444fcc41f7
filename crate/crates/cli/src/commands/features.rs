use std::path::PathBuf;

use clap::Args;
use drtsoh_core::io::{feature_rows, features_to_csv, read_drt, sidecar_path, write_text};

use super::{expand_csv_inputs, file_stem, init_jobs, parse_spectrum_stem};
use crate::{CliResult, Common};

#[derive(Debug, Args)]
pub struct FeaturesArgs {
    /// DRT CSVs (with their JSON sidecars) or directories of them.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Feature CSV to write.
    #[arg(long, short)]
    out: PathBuf,
    #[command(flatten)]
    common: Common,
}

pub fn run(a: FeaturesArgs) -> CliResult {
    init_jobs(&a.common)?;
    // Directories also hold L-curve tables; keep files that have a sidecar.
    let files: Vec<PathBuf> = expand_csv_inputs(&a.inputs)?
        .into_iter()
        .filter(|f| sidecar_path(f).is_file())
        .collect();
    let mut rows = Vec::new();
    for f in &files {
        let (sol, _) = read_drt(f)?;
        let stem = file_stem(f);
        let (cell, day, soc) = match parse_spectrum_stem(&stem) {
            Some((c, d, s)) => (c, Some(d), Some(s)),
            None => (stem, None, None),
        };
        rows.extend(feature_rows(&cell, day, soc, &sol));
    }
    write_text(&a.out, &features_to_csv(rows))?;
    println!("wrote features for {} DRTs to {}", files.len(), a.out.display());
    Ok(())
}
