pub mod drt;
pub mod eval;
pub mod features;
pub mod plotdata;
pub mod synth;
pub mod table;
pub mod train;

use std::path::{Path, PathBuf};

use drtsoh_core::eval::build_samples;
use drtsoh_core::io::load_dataset;
use drtsoh_core::soh::SequenceSample;
use drtsoh_core::synthetic::CellRecord;

use crate::{CliError, CliResult, Common};

/// Size the worker pool once per process.
pub fn init_jobs(common: &Common) -> CliResult {
    if let Some(n) = common.jobs {
        if n == 0 {
            return Err(CliError::usage("--jobs must be >= 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::usage(format!("--jobs: {e}")))?;
    }
    Ok(())
}

pub fn progress(common: &Common, msg: impl AsRef<str>) {
    if common.verbose {
        eprintln!("{}", msg.as_ref());
    }
}

pub fn require_exists(path: &Path, what: &str) -> CliResult {
    if !path.exists() {
        return Err(CliError::data(format!("{what} {} does not exist", path.display())));
    }
    Ok(())
}

pub struct Dataset {
    pub cells: Vec<CellRecord>,
    pub samples: Vec<SequenceSample>,
}

/// Load a dataset and turn each cell into a model input sequence.
pub fn load_samples(data: &Path, lambda: Option<f64>) -> CliResult<Dataset> {
    require_exists(data, "dataset")?;
    let (manifest, cells) = load_dataset(data)?;
    let tg = manifest.tau_grid()?;
    let samples = build_samples(&cells, &tg, lambda)?;
    Ok(Dataset { cells, samples })
}

/// `true` when `p` names a CSV file.
pub fn is_csv(p: &Path) -> bool {
    p.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

/// Expand directories to the CSV files directly inside them, sorted by
/// name; files are kept in the order given.
pub fn expand_csv_inputs(inputs: &[PathBuf]) -> CliResult<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in inputs {
        require_exists(p, "input")?;
        if p.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(p)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.is_file() && is_csv(f))
                .collect();
            found.sort();
            out.extend(found);
        } else {
            out.push(p.clone());
        }
    }
    Ok(out)
}

pub fn file_stem(p: &Path) -> String {
    p.file_stem().map_or_else(|| "spectrum".into(), |s| s.to_string_lossy().into_owned())
}

/// `S01_d090_soc025` → (`S01`, 90, 25).
pub fn parse_spectrum_stem(stem: &str) -> Option<(String, u32, u32)> {
    let mut parts = stem.rsplitn(3, '_');
    let soc = parts.next()?.strip_prefix("soc")?.parse().ok()?;
    let day = parts.next()?.strip_prefix('d')?.parse().ok()?;
    let cell = parts.next()?.to_string();
    Some((cell, day, soc))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stems() {
        assert_eq!(parse_spectrum_stem("S01_d090_soc025"), Some(("S01".into(), 90, 25)));
        assert_eq!(parse_spectrum_stem("my_cell_d000_soc100"), Some(("my_cell".into(), 0, 100)));
        assert_eq!(parse_spectrum_stem("spectrum"), None);
    }
}
