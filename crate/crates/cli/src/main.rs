//! `wiener`: command-line front end for `wiener-core`.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::CliError;

/// Convolutive inverses, decay bounds, dual windows and sampling
/// reconstruction in shift-invariant spaces.
#[derive(Debug, Parser)]
#[command(name = "wiener", version)]
pub struct Cli {
    /// RNG seed, recorded in every output file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Directory receiving the output files (created if missing).
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,

    /// Print errors as one JSON object on stderr.
    #[arg(long, global = true)]
    pub json_errors: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Invert a sequence and bound the decay of its inverse.
    Deconvolve(DeconvolveArgs),
    /// Print the explicit bounds for a decay certificate.
    Bounds(BoundsArgs),
    /// Dual window of a generator with certified and numeric norms.
    DualWindow(DualWindowArgs),
    /// Compare empirical p-Riesz ratios with the certified bounds.
    RieszCheck(RieszArgs),
    /// Sampling and reconstruction experiment on one sampling set.
    SampleRecon(SampleArgs),
    /// Run the verification suite.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct DeconvolveArgs {
    /// Sequence JSON file.
    pub input: PathBuf,
    /// Symbol grid size per axis (power of two).
    #[arg(long, env = "WIENER_GRID_SIZE")]
    pub grid: Option<usize>,
    #[arg(long, default_value_t = 1e-13)]
    pub trunc_tol: f64,
    /// Fail with GridTooSmall instead of doubling the grid.
    #[arg(long)]
    pub fixed_grid: bool,
    /// Multi-index for the recursive bounds, e.g. `2` or `1,1`.
    /// Defaults to all ones.
    #[arg(long, value_delimiter = ',')]
    pub alpha: Option<Vec<u32>>,
    /// Also export the symbol grid as symbol.json and symbol.csv.
    #[arg(long)]
    pub symbol: bool,
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    /// Generator spec (inline JSON or path); supplies C, alpha, A and the
    /// derivative norm.
    #[arg(long)]
    pub generator: Option<String>,
    /// Decay amplitude C.
    #[arg(long)]
    pub c: Option<f64>,
    /// Decay exponent alpha > 3/2.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Lower symbol bound A.
    #[arg(long)]
    pub a: Option<f64>,
    /// M^1_2(a) for the one-dimensional bounds.
    #[arg(long)]
    pub m12: Option<f64>,
    /// ‖φ'‖ in W(L^q, l^1).
    #[arg(long)]
    pub deriv_norm: Option<f64>,
    #[arg(long, default_value = "inf")]
    pub q: f64,
    /// Density radius for ρ and the sampling constants.
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long, default_value_t = 0.9)]
    pub rho_target: f64,
    /// Relative separation N(X) for C_p.
    #[arg(long)]
    pub n_x: Option<u64>,
    #[arg(long, default_value_t = 2.0)]
    pub p: f64,
}

#[derive(Debug, Args)]
pub struct DualWindowArgs {
    /// Generator spec (inline JSON or path).
    #[arg(long)]
    pub generator: String,
    #[arg(long, env = "WIENER_GRID_SIZE")]
    pub grid: Option<usize>,
    #[arg(long, default_value_t = 1e-13)]
    pub trunc_tol: f64,
    /// Samples per unit cell for the numeric amalgam norms and psi.csv.
    #[arg(long, default_value_t = 256)]
    pub per_cell: usize,
}

#[derive(Debug, Args)]
pub struct RieszArgs {
    #[arg(long)]
    pub generator: String,
    /// Exponents to test; `inf` is accepted.
    #[arg(long, value_delimiter = ',', default_value = "1,2,inf")]
    pub p: Vec<f64>,
    #[arg(long, default_value_t = 50)]
    pub trials: usize,
    #[arg(long, default_value_t = 64)]
    pub width: usize,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub generator: String,
    /// Sampling points, first CSV column.
    #[arg(long, conflicts_with_all = ["cells", "jitter"])]
    pub points: Option<PathBuf>,
    /// Window `lo,hi` for explicit points.
    #[arg(long, value_delimiter = ',', num_args = 2)]
    pub window: Option<Vec<f64>>,
    /// Unit cells of a jittered lattice on [0, cells].
    #[arg(long, requires = "jitter")]
    pub cells: Option<usize>,
    /// Relative jitter of the lattice points.
    #[arg(long, requires = "cells")]
    pub jitter: Option<f64>,
    /// Density radius; defaults to the smallest the set supports
    /// (explicit points) or δ* (jittered lattice).
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long, default_value_t = 2.0)]
    pub p: f64,
    #[arg(long, default_value = "inf")]
    pub q: f64,
    #[arg(long, default_value_t = 0.9)]
    pub rho_target: f64,
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
    #[arg(long, default_value_t = 500)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 1)]
    pub margin: usize,
    #[arg(long, default_value_t = 20)]
    pub trials: usize,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Suite config JSON; missing fields take the defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Run the suite once and skip the repeat-run criterion.
    #[arg(long)]
    pub once: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(code) => code,
        Err(err) => {
            report(&err, cli.json_errors);
            ExitCode::from(err.exit_code())
        }
    }
}

fn report(err: &CliError, json: bool) {
    if json {
        let value = serde_json::json!({
            "error": err.kind(),
            "message": err.to_string(),
            "exit_code": err.exit_code(),
        });
        eprintln!("{value}");
    } else {
        eprintln!("error [{}]: {err}", err.kind());
    }
}
