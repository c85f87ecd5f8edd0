use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "igflow",
    version,
    about = "Simulate Hamilton and gradient flows of thermodynamic models and verify their invariants"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate a flow and write the trajectory as CSV.
    Simulate(SimulateArgs),
    /// Run the invariant checks and write a JSON report.
    Verify(VerifyArgs),
    /// Append derived columns to a trajectory CSV.
    ExportPlotdata(ExportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FlowKind {
    /// Hamilton's equations in the mock time tau.
    Hamilton,
    /// The entropy gradient flow in t.
    Gradient,
    /// The KL gradient flow on a finite support.
    Discrete,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(value_enum)]
    pub kind: FlowKind,

    /// Model configuration JSON (hamilton and gradient only).
    #[arg(long)]
    pub model: Option<PathBuf>,

    /// Initial state, comma separated.
    #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true, num_args = 1)]
    pub q0: Vec<f64>,

    /// Target distribution of the discrete flow, comma separated.
    #[arg(long, value_delimiter = ',', num_args = 1)]
    pub q2: Vec<f64>,

    /// Parameter span as start:end.
    #[arg(long, value_parser = parse_span, allow_hyphen_values = true)]
    pub span: (f64, f64),

    /// Fixed RK4 step [default: 1e-3 E for hamilton, 1e-3 otherwise].
    #[arg(long)]
    pub step: Option<f64>,

    /// Spacing of the output samples.
    #[arg(long, default_value_t = 0.01)]
    pub output_step: f64,

    /// Use the adaptive Dormand-Prince 5(4) method instead of RK4.
    #[arg(long)]
    pub adaptive: bool,

    #[arg(long, default_value_t = 1e-10, requires = "adaptive")]
    pub rtol: f64,

    #[arg(long, default_value_t = 1e-12, requires = "adaptive")]
    pub atol: f64,

    #[arg(long, default_value_t = 1e-10, requires = "adaptive")]
    pub min_step: f64,

    #[arg(long, default_value_t = 0.1, requires = "adaptive")]
    pub max_step: f64,

    /// Output CSV path [default: standard output].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Model configuration JSON.
    #[arg(long)]
    pub model: PathBuf,

    #[arg(long, default_value = "all")]
    pub suite: String,

    /// Tolerance overrides as JSON. $IGFLOW_TOLERANCES, when set, takes precedence.
    #[arg(long)]
    pub tolerances: Option<PathBuf>,

    /// Seed for the randomly sampled states and distributions.
    #[arg(long, default_value_t = 42)]
    pub seed: u64,

    /// Output JSON path [default: standard output].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    /// Trajectory CSV written by `simulate`.
    #[arg(long)]
    pub input: PathBuf,

    /// Derived columns to append: s, T, P, H, D, eikonal.
    #[arg(long, value_delimiter = ',', num_args = 1)]
    pub quantities: Vec<String>,

    /// Model configuration JSON (needed for s, H and eikonal).
    #[arg(long)]
    pub model: Option<PathBuf>,

    /// Target distribution (needed for D).
    #[arg(long, value_delimiter = ',', num_args = 1)]
    pub q2: Vec<f64>,

    /// Output CSV path [default: standard output].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_span(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| format!("span must look like start:end, got '{s}'"))?;
    let parse = |x: &str| {
        x.trim()
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| format!("'{x}' is not a finite number"))
    };
    Ok((parse(a)?, parse(b)?))
}
