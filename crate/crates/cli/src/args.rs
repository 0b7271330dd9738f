use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use lipbound::{Activation, Grid, Method};

#[derive(Debug, Parser)]
#[command(
    name = "lipbound",
    version,
    about = "Certified Lipschitz upper bounds for feedforward networks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a random network.
    Gen(GenArgs),
    /// Compute a Lipschitz upper bound.
    Compute(ComputeArgs),
    /// Check a computed bound against sampled Jacobians and the LipSDP matrix.
    Verify(VerifyArgs),
    /// Time every method over a grid of network shapes and write CSV.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Number of hidden layers.
    #[arg(long)]
    pub layers: usize,
    /// Neurons per hidden layer.
    #[arg(long)]
    pub width: usize,
    #[arg(long = "in")]
    pub in_dim: usize,
    #[arg(long = "out")]
    pub out_dim: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "tanh")]
    pub activation: Activation,
    /// Output path; `.lnet` selects the binary format. Prints JSON to stdout
    /// when omitted.
    #[arg(short = 'o', long = "o", alias = "output")]
    pub output: Option<PathBuf>,
}

/// A single method or the best-of search.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MethodChoice {
    Single(Method),
    Best,
}

impl FromStr for MethodChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("best") {
            return Ok(MethodChoice::Best);
        }
        s.parse::<Method>().map(MethodChoice::Single).map_err(|_| {
            format!(
                "unknown method {s:?}; expected product, fast, sn, gc, gcs, shift, interp or best"
            )
        })
    }
}

impl fmt::Display for MethodChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MethodChoice::Single(m) => write!(f, "{m}"),
            MethodChoice::Best => f.write_str("best"),
        }
    }
}

#[derive(Debug, Args)]
pub struct ComputeArgs {
    /// Network file (JSON or binary).
    #[arg(long)]
    pub net: PathBuf,
    /// product, fast, sn, gc, gcs, shift, interp or best.
    #[arg(long, default_value = "fast")]
    pub method: MethodChoice,
    /// Scalar hyperparameter; defaults to 2 for shift and 1 otherwise.
    #[arg(long, conflicts_with = "sweep")]
    pub c: Option<f64>,
    /// Search `c` over `lo:hi:step` or a comma list. With `best`, replaces
    /// the sn, gc and gcs grids.
    #[arg(long)]
    pub sweep: Option<Grid>,
    /// Weight on the SN endpoint for interp (default 0.5).
    #[arg(long)]
    pub theta: Option<f64>,
    /// Comma-separated interp weights searched by `best` (interp is off
    /// in `best` unless given).
    #[arg(long, value_delimiter = ',')]
    pub thetas: Option<Vec<f64>>,
    /// Multiplier for coordinates with a zero Gershgorin row.
    #[arg(long = "d-tilde", default_value_t = 1.0)]
    pub d_tilde: f64,
    /// GCS scaling where the diagonal vanishes.
    #[arg(long = "epsilon-q")]
    pub epsilon_q: Option<f64>,
    /// Bound the final spectral norm by row sums instead of power iteration.
    #[arg(long)]
    pub certified: bool,
    /// Worker threads for sweeps.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Write the full JSON report here.
    #[arg(short = 'o', long = "o", alias = "output")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub net: PathBuf,
    /// Report written by `compute`.
    #[arg(long)]
    pub report: PathBuf,
    #[arg(long, default_value_t = 200)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Radius of the sampling ball.
    #[arg(long, default_value_t = lipbound::certify::DEFAULT_RADIUS)]
    pub radius: f64,
    /// Require the LMI check and report when the dimension cap prevents it.
    #[arg(long, conflicts_with = "no_lmi")]
    pub lmi: bool,
    /// Skip the LMI check.
    #[arg(long = "no-lmi")]
    pub no_lmi: bool,
    /// Largest LMI dimension to factor.
    #[arg(long = "lmi-cap", default_value_t = lipbound::certify::DEFAULT_DIMENSION_CAP)]
    pub lmi_cap: usize,
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Write the validation report here instead of stdout.
    #[arg(short = 'o', long = "o", alias = "output")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    pub depths: Vec<usize>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub widths: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub seeds: Vec<u64>,
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "product,fast,sn,gc,gcs,shift,interp"
    )]
    pub methods: Vec<Method>,
    /// Input dimension; defaults to the width.
    #[arg(long = "in")]
    pub in_dim: Option<usize>,
    #[arg(long = "out", default_value_t = 10)]
    pub out_dim: usize,
    #[arg(long, default_value = "tanh")]
    pub activation: Activation,
    #[arg(long = "c-sn", default_value_t = 1.0)]
    pub c_sn: f64,
    #[arg(long = "c-gc", default_value_t = 1.0)]
    pub c_gc: f64,
    #[arg(long = "c-gcs", default_value_t = 1.0)]
    pub c_gcs: f64,
    #[arg(long = "c-shift", default_value_t = 2.0)]
    pub c_shift: f64,
    #[arg(long = "c-interp", default_value_t = 1.0)]
    pub c_interp: f64,
    #[arg(long, default_value_t = 0.5)]
    pub theta: f64,
    #[arg(long)]
    pub certified: bool,
    /// Concurrent runs; timings are only comparable with 1.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// CSV path (stdout when omitted). A manifest is written next to it.
    #[arg(short = 'o', long = "o", alias = "output")]
    pub output: Option<PathBuf>,
}
