use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ppz_core::appz::WindowSampling;
use ppz_core::builtins::DEFAULT_ETA_TERMS;
use ppz_core::geometry::Window;
use ppz_core::target::DEFAULT_EPS;

#[derive(Debug, Parser)]
#[command(
    name = "ppz",
    version,
    about = "Find zeros and extrema by thinning a Poisson point process with intensity exp(-K |f|^Q)"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Locate zeros of a target with adaptive window refinement.
    Zeros(ZerosCmd),
    /// Locate stationary points as zeros of the finite-difference gradient.
    Extrema(ExtremaCmd),
    /// Estimate the intensity measure by Riemann sum and Monte Carlo, and
    /// count the accepted candidates of one realization.
    ExpectedCount(CountCmd),
    /// Pointwise envelope of the random intensity with K ~ Gamma.
    CoxEnvelope(CoxCmd),
    /// Run the registered reference experiments.
    Repro(ReproCmd),
}

/// `--Q auto` or a positive number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QArg {
    Auto,
    Value(f64),
}

impl FromStr for QArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(QArg::Auto);
        }
        match s.parse::<f64>() {
            Ok(q) if q > 0.0 && q.is_finite() => Ok(QArg::Value(q)),
            _ => Err(format!("expected 'auto' or a positive number, got '{s}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Sampling {
    RootVolume,
    WindowVolume,
}

impl From<Sampling> for WindowSampling {
    fn from(s: Sampling) -> Self {
        match s {
            Sampling::RootVolume => WindowSampling::RootVolume,
            Sampling::WindowVolume => WindowSampling::WindowVolume,
        }
    }
}

#[derive(Debug, Args)]
#[group(id = "source", required = true, multiple = false)]
pub struct Source {
    /// Target expression: `x` or `x1..xp` in real mode, `s` with `--complex`;
    /// separate vector components with `;`.
    #[arg(long = "fn", value_name = "EXPR")]
    pub expr: Option<String>,
    /// Named target: cos, sincos, hard-poly, sum-sq(p), gauss(p), sincos2d,
    /// eta, zeta.
    #[arg(long, value_name = "NAME")]
    pub builtin: Option<String>,
}

#[derive(Debug, Args)]
pub struct TargetArgs {
    #[command(flatten)]
    pub source: Source,
    /// Read `--fn` as a function of one complex variable `s = sigma + i t`.
    #[arg(long)]
    pub complex: bool,
    /// Input dimension; defaults to the window's.
    #[arg(long)]
    pub dim: Option<usize>,
    /// Search window, `lo:hi` per axis separated by commas.
    #[arg(long, allow_hyphen_values = true)]
    pub window: Window,
    /// Feasible set as a comparison over the same grammar, e.g. "x1+x2 >= 1".
    #[arg(long, value_name = "EXPR")]
    pub constraint: Option<String>,
    /// Series length for eta and zeta.
    #[arg(long, default_value_t = DEFAULT_ETA_TERMS)]
    pub eta_terms: usize,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; defaults to the machine's parallelism. Results do not
    /// depend on it.
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Write results here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-depth progress on stderr.
    #[arg(long)]
    pub diagnostics: bool,
}

#[derive(Debug, Args)]
pub struct IntensityArgs {
    #[arg(long = "K", default_value_t = 10.0)]
    pub k: f64,
    /// `auto` picks 0.5 for real targets, 1 for p >= 4, 2 for complex.
    #[arg(long = "Q", default_value = "auto")]
    pub q: QArg,
    /// Rate of the dominating homogeneous process.
    #[arg(long = "N", default_value_t = 1000.0)]
    pub n: f64,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    #[command(flatten)]
    pub intensity: IntensityArgs,
    #[arg(long, default_value_t = 1e-1)]
    pub tol_start: f64,
    #[arg(long, default_value_t = 1e-10)]
    pub tol_end: f64,
    #[arg(long, default_value_t = 10)]
    pub iters: usize,
    /// Half-side of a refinement window relative to its parent.
    #[arg(long, default_value_t = 0.01)]
    pub r_frac: f64,
    /// Window growth factor when a refinement finds nothing.
    #[arg(long, default_value_t = 1.1)]
    pub growth: f64,
    /// Rate growth factor when a refinement finds nothing.
    #[arg(long, default_value_t = 1.1)]
    pub n_growth: f64,
    /// Rate used inside refinement windows; defaults to `--N`.
    #[arg(long)]
    pub child_n: Option<f64>,
    /// How refinement windows translate the rate into a proposal count.
    #[arg(long, value_enum, default_value_t = Sampling::RootVolume)]
    pub window_sampling: Sampling,
    /// Duplicate radius as a fraction of the root side.
    #[arg(long, default_value_t = 1e-3)]
    pub dedup_radius: f64,
    #[arg(long, default_value_t = 10_000)]
    pub max_windows: usize,
    #[arg(long, default_value_t = 25)]
    pub retry_cap: u32,
    #[arg(long, default_value_t = 3)]
    pub escalation_cap: u32,
}

#[derive(Debug, Args)]
pub struct ZerosCmd {
    #[command(flatten)]
    pub target: TargetArgs,
    #[command(flatten)]
    pub search: SearchArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct ExtremaCmd {
    #[command(flatten)]
    pub target: TargetArgs,
    #[command(flatten)]
    pub search: SearchArgs,
    /// Finite-difference step.
    #[arg(long, default_value_t = DEFAULT_EPS)]
    pub eps: f64,
    /// Central instead of forward differences.
    #[arg(long)]
    pub central: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct CountCmd {
    #[command(flatten)]
    pub target: TargetArgs,
    #[command(flatten)]
    pub intensity: IntensityArgs,
    /// Tolerance gate of the realization.
    #[arg(long, default_value_t = 1e-1)]
    pub tol_start: f64,
    /// Riemann cells per axis; defaults to about 10^6 cells in total.
    #[arg(long)]
    pub grid: Option<usize>,
    /// Monte Carlo sample count.
    #[arg(long, default_value_t = 1_000_000)]
    pub samples: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct CoxCmd {
    #[command(flatten)]
    pub target: TargetArgs,
    /// `auto` picks 0.5 for real targets, 1 for p >= 4, 2 for complex.
    #[arg(long = "Q", default_value = "auto")]
    pub q: QArg,
    #[arg(long, default_value_t = 5.0)]
    pub gamma_shape: f64,
    /// Rate of the Gamma law (mean = shape / rate).
    #[arg(long, default_value_t = 2.0, conflicts_with = "gamma_scale")]
    pub gamma_rate: f64,
    /// Give the scale (1 / rate) instead of the rate.
    #[arg(long)]
    pub gamma_scale: Option<f64>,
    #[arg(long, default_value_t = 1000)]
    pub draws: usize,
    /// Grid points per axis.
    #[arg(long, default_value_t = 201)]
    pub grid: usize,
    /// Central coverage of the envelope.
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct ReproCmd {
    /// Case id; omit with `--all` or `--only`.
    #[arg(conflicts_with = "all")]
    pub id: Option<String>,
    /// Run every registered case except the slow ones.
    #[arg(long)]
    pub all: bool,
    /// Glob over case ids.
    #[arg(long, value_name = "GLOB")]
    pub only: Option<String>,
    /// Include cases flagged slow in `--all`.
    #[arg(long)]
    pub include_slow: bool,
    /// Multiplies every case's time budget.
    #[arg(long, default_value_t = 1.0)]
    pub budget_scale: f64,
    /// List the registry and exit.
    #[arg(long)]
    pub list: bool,
    #[arg(long)]
    pub threads: Option<usize>,
    /// Summary as json or csv instead of a table.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}
