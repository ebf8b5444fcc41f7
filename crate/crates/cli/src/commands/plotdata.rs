use std::path::PathBuf;

use clap::{Args, ValueEnum};
use drtsoh_core::eis::TimeConstantGrid;
use drtsoh_core::io::{read_drt_table, read_header, read_lcurve_table, write_text, DRT_HEADER, LCURVE_HEADER};

use super::{expand_csv_inputs, file_stem, init_jobs};
use crate::plot::{to_csv, to_svg, Axis, Series};
use crate::{CliError, CliResult, Common};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Svg,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    Drt,
    Lcurve,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// DRT CSVs or L-curve CSVs, or directories of them.
    inputs: Vec<PathBuf>,
    /// Output file.
    #[arg(long, short)]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Svg)]
    format: Format,
    /// Table kind; detected from the CSV header when inputs are given.
    #[arg(long, value_enum)]
    kind: Option<Kind>,
    #[command(flatten)]
    common: Common,
}

fn detect(path: &std::path::Path) -> CliResult<Option<Kind>> {
    let header = read_header(path)?;
    Ok(if header == DRT_HEADER.join(",") {
        Some(Kind::Drt)
    } else if header == LCURVE_HEADER.join(",") {
        Some(Kind::Lcurve)
    } else {
        None
    })
}

pub fn run(a: PlotArgs) -> CliResult {
    init_jobs(&a.common)?;
    let files = expand_csv_inputs(&a.inputs)?;
    let mut kind = a.kind;
    let mut series = Vec::new();
    for f in &files {
        let found = detect(f)?;
        let Some(k) = found else {
            // Directories may hold other tables; explicit files must parse.
            if a.inputs.contains(f) {
                return Err(CliError::data(format!("{}: not a DRT or L-curve table", f.display())));
            }
            continue;
        };
        match kind {
            None => kind = Some(k),
            Some(prev) if prev != k => {
                return Err(CliError::usage("cannot mix DRT and L-curve tables in one bundle"));
            }
            _ => {}
        }
        let name = file_stem(f);
        match k {
            Kind::Drt => {
                let (taus, g) = read_drt_table(f)?;
                let widths = TimeConstantGrid::from_taus(taus.clone())?.log10_widths();
                let y = g.iter().zip(&widths).map(|(g, w)| g / w).collect();
                series.push(Series { name, x: taus, y });
            }
            Kind::Lcurve => {
                let rows = read_lcurve_table(f)?;
                series.push(Series {
                    name,
                    x: rows.iter().map(|r| r[1]).collect(),
                    y: rows.iter().map(|r| r[2]).collect(),
                });
            }
        }
    }
    if series.is_empty() {
        eprintln!("warning: no input curves; writing an empty bundle");
    }
    let kind = kind.unwrap_or(Kind::Drt);
    let text = match a.format {
        Format::Csv => to_csv(&series),
        Format::Svg => match kind {
            Kind::Drt => to_svg(
                &series,
                Axis { label: "tau [s]", log: true },
                Axis { label: "g [ohm per decade]", log: false },
                "Distribution of relaxation times",
            ),
            Kind::Lcurve => to_svg(
                &series,
                Axis { label: "residual norm [ohm]", log: true },
                Axis { label: "solution norm [ohm]", log: true },
                "L-curve",
            ),
        },
    };
    write_text(&a.out, &text)?;
    println!("wrote {} series to {}", series.len(), a.out.display());
    Ok(())
}
