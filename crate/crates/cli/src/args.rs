use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "zenoamp",
    version,
    about = "Zeno-enhanced 129Xe field amplification: traces, optima, sweeps and axion bounds"
)]
pub struct Cli {
    /// Flat `key = value` config file; flags override it.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Worker threads for sweeps. Never changes output bytes.
    #[arg(long, global = true, value_name = "N")]
    pub workers: Option<usize>,

    /// How a detuning in Hz is read: `frequency` (Δ = 2π·f) or `angular` (Δ = f).
    #[arg(long, global = true, value_name = "frequency|angular")]
    pub detuning_convention: Option<String>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate one P(t) trace and write it as CSV.
    Simulate(SimulateArgs),
    /// Optimal time and optimal P⊥ from a full numeric trace.
    Optimal(OptimalArgs),
    /// 1-D or 2-D parameter sweep.
    Sweep(SweepArgs),
    /// Rescale a coupling-constant exclusion curve by the amplification gain.
    Constrain(ConstrainArgs),
    /// Print constants, resolved defaults and the M_n calibration.
    Info(InfoArgs),
}

/// Physical parameters. Each overrides the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct ParamArgs {
    /// Oscillating field amplitude with unit, e.g. `10pT`.
    #[arg(long, value_name = "FIELD")]
    pub bac: Option<String>,
    /// Static field with unit, e.g. `1uT`.
    #[arg(long, value_name = "FIELD")]
    pub b0: Option<String>,
    /// Detuning with unit: `2.5mHz` or `0.0157rad/s`.
    #[arg(long, value_name = "FREQ")]
    pub detuning: Option<String>,
    /// T₁ = T₂ (seconds unless suffixed).
    #[arg(long = "T", value_name = "TIME", conflicts_with_all = ["t1", "t2"])]
    pub t: Option<String>,
    #[arg(long = "T1", value_name = "TIME")]
    pub t1: Option<String>,
    #[arg(long = "T2", value_name = "TIME")]
    pub t2: Option<String>,
    /// `gaussian` or `markovian`.
    #[arg(long, value_name = "MODEL")]
    pub noise: Option<String>,
    /// Gyromagnetic ratio in Hz/μT.
    #[arg(long, value_name = "HZ_PER_UT")]
    pub gamma: Option<f64>,
    #[arg(long, value_name = "K")]
    pub kappa0: Option<f64>,
    /// Maximum nuclear magnetization with unit, e.g. `0.2uT`.
    #[arg(long, value_name = "FIELD")]
    pub m0: Option<String>,
    /// Initial polarization.
    #[arg(long, value_name = "P0")]
    pub p0: Option<f64>,
    /// Integrator step (seconds unless suffixed).
    #[arg(long, value_name = "TIME")]
    pub dt: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FrameArg {
    Rotating,
    Lab,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    /// End of the trace; defaults to 3·max(T₁, T₂).
    #[arg(long, value_name = "TIME")]
    pub tmax: Option<String>,
    /// Keep every N-th step (t = 0 and t = tmax are always kept).
    #[arg(long, default_value_t = 100)]
    pub stride: usize,
    #[arg(long, value_enum, default_value_t = FrameArg::Rotating)]
    pub frame: FrameArg,
    /// `numeric` (full integration) or `analytic` (weak-field closed form, rotating frame).
    #[arg(long, default_value = "numeric")]
    pub engine: String,
    /// Output CSV; stdout when omitted.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OptimalArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    /// Search window; defaults to 3·max(T₁, T₂).
    #[arg(long, value_name = "TIME")]
    pub tmax: Option<String>,
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    /// `name: v1, v2, ...` or `name: min..max/count [lin|log]`, name ∈ {b_ac, delta, T, t}.
    #[arg(long, value_name = "AXIS")]
    pub axis1: Option<String>,
    #[arg(long, value_name = "AXIS")]
    pub axis2: Option<String>,
    /// `p_perp_opt`, `t_opt` or `p_perp_trace`.
    #[arg(long)]
    pub observable: Option<String>,
    /// Comma-separated noise models.
    #[arg(long)]
    pub models: Option<String>,
    /// `numeric` (full integration) or `analytic` (weak-field closed forms).
    #[arg(long)]
    pub engine: Option<String>,
    #[arg(long, default_value = "csv", value_name = "csv|json")]
    pub format: String,
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ConstrainArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    /// Baseline CSV with header `mass_eV,g2_over_4`.
    #[arg(long, value_name = "PATH")]
    pub baseline: PathBuf,
    /// `auto` (numeric Gaussian/Markovian optima), `sqrt-e`, or a number.
    #[arg(long, default_value = "auto")]
    pub factor: String,
    /// Keep every mass instead of clipping to the axion window.
    #[arg(long, conflicts_with = "window")]
    pub no_clip: bool,
    /// Clipping window `lo,hi` with units, e.g. `3.2ueV,24.3ueV`.
    #[arg(long, value_name = "LO,HI")]
    pub window: Option<String>,
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InfoArgs {
    #[command(flatten)]
    pub params: ParamArgs,
}
