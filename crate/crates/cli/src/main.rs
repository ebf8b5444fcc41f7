//! `drtsoh`: synthetic data, DRT fitting, features, SOH model training and
//! evaluation, and plot data.

mod commands;
mod config;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use drtsoh_core::Error;

/// Exit codes: 0 success, 1 usage, 2 data, 3 numeric failure.
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_DATA: u8 = 2;
pub const EXIT_NUMERIC: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "drtsoh", version, about = "DRT deconvolution and LSTM state-of-health estimation")]
#[command(args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct Common {
    /// JSON file whose keys set any flag of this subcommand; explicit flags win.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Seed for every random choice.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads for independent spectra or cells.
    #[arg(long, value_name = "N")]
    jobs: Option<usize>,
    /// Print progress to stderr.
    #[arg(short, long)]
    verbose: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate the synthetic 22-cell dataset (manifest + spectrum CSVs).
    Synth(commands::synth::SynthArgs),
    /// Fit a DRT to each input spectrum.
    Drt(commands::drt::DrtArgs),
    /// Extract band resistances and peaks from DRT CSVs.
    Features(commands::features::FeaturesArgs),
    /// Train the LSTM SOH model on a dataset split.
    Train(commands::train::TrainArgs),
    /// Evaluate a checkpoint on its held-out cells.
    Eval(commands::eval::EvalArgs),
    /// Run the ten-set LSTM vs linear-regression comparison.
    Table(commands::table::TableArgs),
    /// Render DRT curves or L-curves as SVG or CSV.
    Plotdata(commands::plotdata::PlotArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Real,
    Complex,
}

impl From<Mode> for drtsoh_core::drt::FitMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Real => drtsoh_core::drt::FitMode::Real,
            Mode::Complex => drtsoh_core::drt::FitMode::Complex,
        }
    }
}

/// Error carrying its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_DATA,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError {
            code: if e.is_numeric() { EXIT_NUMERIC } else { EXIT_DATA },
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::data(e.to_string())
    }
}

pub type CliResult<T = ()> = Result<T, CliError>;

fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::Synth(a) => commands::synth::run(a),
        Command::Drt(a) => commands::drt::run(a),
        Command::Features(a) => commands::features::run(a),
        Command::Train(a) => commands::train::run(a),
        Command::Eval(a) => commands::eval::run(a),
        Command::Table(a) => commands::table::run(a),
        Command::Plotdata(a) => commands::plotdata::run(a),
    }
}

fn main() -> ExitCode {
    let args = match config::expand_args(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
