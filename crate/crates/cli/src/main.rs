//! `momentshape`: moments, exponential transforms, reconstruction and
//! stability experiments from the command line.

mod commands;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

/// Exit status for numerical validation failures.
const EXIT_VALIDATION: u8 = 1;
/// Exit status for usage and input errors.
const EXIT_USAGE: u8 = 2;

#[derive(Parser, Debug)]
#[command(
    name = "momentshape",
    version,
    about = "Shapes from truncated power moments"
)]
pub struct Cli {
    /// Seed for every randomized step.
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,
    /// Grid resolution for sampled shade functions.
    #[arg(long, global = true)]
    pub grid_n: Option<usize>,
    /// Relative eigenvalue threshold (reconstruct: 1e-8, markov1d: 1e-12).
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// More log output on stderr (-v, -vv).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ModeArg {
    Null,
    Lowest,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Moment table of a domain description.
    Moments {
        #[arg(long)]
        spec: PathBuf,
        /// Truncation order (box 0..=d, or 0..=d on the line).
        #[arg(long, default_value_t = 4)]
        d: usize,
        /// Perturbation applied before sampling on a grid.
        #[arg(long)]
        perturbation: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Moments to transform coefficients, or back for `b`/`t` tables.
    Exptransform {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Shape reconstruction from a coefficient or moment table.
    Reconstruct {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        max_degree: Option<usize>,
        #[arg(long, value_enum, default_value_t = ModeArg::Null)]
        mode: ModeArg,
        /// CSV of points on {Q(z, z̄) = 0}.
        #[arg(long)]
        boundary_csv: Option<PathBuf>,
        /// Lattice size for the boundary samples on [-1, 1]².
        #[arg(long, default_value_t = 201)]
        boundary_n: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Interval union from line moments.
    Markov1d {
        #[arg(long)]
        input: PathBuf,
        /// Highest moment index when the input lists intervals.
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo volumes of {|p| < δ} and their ratios to δ^{1/|α|}.
    Volume {
        #[arg(long)]
        poly: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "1e-2,1e-3,1e-4,1e-5")]
        delta_grid: Vec<f64>,
        #[arg(long, default_value_t = 1_000_000)]
        samples: usize,
        /// Admissible index, e.g. `1,1`; defaults to the first one found.
        #[arg(long, value_delimiter = ',')]
        alpha: Option<Vec<u32>>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Stability experiments from a JSON config (one job or an array).
    Stability {
        #[arg(long)]
        config: PathBuf,
        /// Directory for per-job CSV files and summary.json.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Disk end-to-end checks.
    Selftest,
}

/// Why a command failed.
#[derive(Debug)]
pub enum Failure {
    Usage(anyhow::Error),
    Validation(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Usage(e)
    }
}

impl From<momentshape::Error> for Failure {
    fn from(e: momentshape::Error) -> Self {
        Failure::Validation(e.into())
    }
}

fn init_threads() -> Result<(), Failure> {
    if let Ok(v) = std::env::var("MOMENTSHAPE_THREADS") {
        let n: usize = v.parse().ok().filter(|&n| n > 0).ok_or_else(|| {
            anyhow::anyhow!("MOMENTSHAPE_THREADS must be a positive integer, got {v:?}")
        })?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(anyhow::Error::from)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .init();
    if let Some(t) = cli.tol {
        if !(t > 0.0) {
            eprintln!("error: --tol must be positive");
            return ExitCode::from(EXIT_USAGE);
        }
    }
    let result = init_threads().and_then(|()| commands::run(&cli));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Validation(e)) => {
            eprintln!("validation failed: {e:#}");
            ExitCode::from(EXIT_VALIDATION)
        }
    }
}
