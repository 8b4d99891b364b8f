use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use bifurc::Mode;

#[derive(Debug, Clone, Parser)]
#[command(
    name = "bifurc",
    version,
    about = "Candidate bifurcation values and fiber transports"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Problem file (TOML); required by `scan` and `transport`.
    #[arg(long, global = true)]
    pub problem: Option<PathBuf>,
    /// Directory for the report and CSV tables.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Radius steps `K` of the sweep (radii r0·q^k, k = 0..=K).
    #[arg(long, global = true)]
    pub radii: Option<usize>,
    /// Sphere directions per radius.
    #[arg(long, global = true)]
    pub dirs: Option<usize>,
    /// Endpoint tolerance of transports.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Record wall-clock timings in the report (breaks byte-identical output).
    #[arg(long, global = true)]
    pub timings: bool,
}

#[derive(Debug, Clone, Subcommand, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Sweep spheres for K∞, check the (g,S)-Malgrange condition, or find S₀.
    Scan {
        #[arg(long, value_enum)]
        kind: ScanKind,
    },
    /// Transport points to the fiber f = λ.
    Transport {
        #[arg(long, allow_hyphen_values = true)]
        lambda: f64,
        #[arg(long, value_enum, default_value = "ambient")]
        mode: ModeArg,
        /// Start points, e.g. "1,2;3.5,-1". Manifold starts within 1e-3 of
        /// g = 0 are projected onto it; others are rejected.
        #[arg(long, allow_hyphen_values = true, conflicts_with = "sample")]
        starts: Option<String>,
        /// Number of random starts with norms in [min-norm, max-norm];
        /// in manifold mode each is projected onto g = 0.
        #[arg(long)]
        sample: Option<usize>,
        #[arg(long, default_value_t = 1.0)]
        min_norm: f64,
        #[arg(long, default_value_t = 10.0)]
        max_norm: f64,
        /// Also write one CSV table per trajectory.
        #[arg(long)]
        csv: bool,
    },
    /// Reproduce the built-in examples and check them against their expectations.
    Examples {
        #[arg(value_enum, default_value = "all")]
        which: ExampleName,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanKind {
    Kinf,
    Gs,
    Szero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeArg {
    Ambient,
    Manifold,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Ambient => Mode::Ambient,
            ModeArg::Manifold => Mode::Manifold,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExampleName {
    Ex1,
    Exa2,
    Exa3,
    Exa4,
    Sec4,
    All,
}
