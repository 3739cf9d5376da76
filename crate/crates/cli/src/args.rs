use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(
    name = "hypctl",
    version,
    about = "Controllability toolkit for stochastic symmetric hyperbolic systems"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check symmetry of A_i and list the boundary decomposition per face.
    Validate(RunArgs),
    /// Certify the decay condition for the best linear weight and report T0.
    CheckCondition(RunArgs),
    /// Trace random bicharacteristic rays and check the decay of eta along them.
    Rays(RunArgs),
    /// Run the forward solver from a smooth bump with zero controls.
    Simulate(RunArgs),
    /// Synthesize a min-norm control for a leaf-dependent target.
    Control(RunArgs),
    /// Extreme singular values of the control-to-state map over a T list.
    Observability(RunArgs),
    /// Carleman weighted identity and the observability sweep over (T, lambda).
    Carleman(RunArgs),
    /// Summary report with T0 and the Gramian spectrum at T.
    Report(RunArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Validate(_) => "validate",
            Command::CheckCondition(_) => "check-condition",
            Command::Rays(_) => "rays",
            Command::Simulate(_) => "simulate",
            Command::Control(_) => "control",
            Command::Observability(_) => "observability",
            Command::Carleman(_) => "carleman",
            Command::Report(_) => "report",
        }
    }

    pub fn args(&self) -> &RunArgs {
        match self {
            Command::Validate(a)
            | Command::CheckCondition(a)
            | Command::Rays(a)
            | Command::Simulate(a)
            | Command::Control(a)
            | Command::Observability(a)
            | Command::Carleman(a)
            | Command::Report(a) => a,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Target {
    /// Bump times the sign of the last Brownian increment.
    BumpSign,
    /// Bump-sign target plus seeded Gaussian leaf noise.
    Random,
}

/// Flags shared by all subcommands; each one overrides the `--run` file.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// Registered example system.
    #[arg(long, conflicts_with = "config")]
    pub system: Option<String>,
    /// System config file (TOML).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Run config file (TOML) with the same keys as these flags.
    #[arg(long)]
    pub run: Option<PathBuf>,
    /// Cells per axis; one value is repeated over all axes.
    #[arg(long, value_delimiter = ',')]
    pub cells: Option<Vec<usize>>,
    /// Scenario tree depth M.
    #[arg(long)]
    pub depth: Option<usize>,
    /// Horizon T.
    #[arg(long = "T")]
    pub horizon: Option<f64>,
    #[arg(long)]
    pub cfl: Option<f64>,
    /// Control residual tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Lanczos steps for spectrum estimates.
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Carleman lambda list.
    #[arg(long, value_delimiter = ',')]
    pub lambdas: Option<Vec<f64>>,
    /// Horizon list for sweeps.
    #[arg(long = "T-list", value_delimiter = ',')]
    pub t_list: Option<Vec<f64>>,
    /// Random rays per branch.
    #[arg(long)]
    pub rays: Option<usize>,
    /// Support of v over cells as a 0/1 string.
    #[arg(long)]
    pub v_mask: Option<String>,
    /// Use only the boundary control u.
    #[arg(long, conflicts_with = "internal_only")]
    pub boundary_only: bool,
    /// Use only the internal control v.
    #[arg(long)]
    pub internal_only: bool,
    /// Drop the `B3 v` drift from the internal channel.
    #[arg(long)]
    pub drop_b3: bool,
    #[arg(long, value_enum)]
    pub target: Option<Target>,
    /// Also write the resolved system config as `system.toml`.
    #[arg(long)]
    pub dump_config: bool,
}
