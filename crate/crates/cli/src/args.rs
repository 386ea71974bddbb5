use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

/// Seeded experiments on model metric measure spaces.
///
/// Every run writes `report.json` (and CSV tables) into `--out`; the exit code is 0 when the checked
/// property holds and 1 when it fails, with the failing check serialized to `witness.json`.
#[derive(Debug, Parser)]
#[command(name = "mmspace", version)]
pub struct Cli {
    /// Master seed; overrides the config file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// JSON experiment config; flags given on the command line override its values.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Affine dimension, convexity, non-degeneracy and absolute continuity of a Euclidean cloud.
    Theorem1(Theorem1Args),
    /// Monte-Carlo measure contraction check against the profile (1−t)^N.
    Mcp(McpArgs),
    /// Build, verify, rescale, extend and push inversion plans.
    Plan(PlanArgs),
    /// Exact W₂ transport and displacement interpolation.
    Transport(TransportArgs),
    /// Push a convex-body plan through an ε-isometry.
    Stability(StabilityArgs),
    /// Round trips, orthogonality, inversion collinearity and cut loci on ℍ¹.
    HeisSuite(HeisSuiteArgs),
}

impl Command {
    pub fn kind(&self) -> &'static str {
        match self {
            Command::Theorem1(_) => "theorem1",
            Command::Mcp(_) => "mcp",
            Command::Plan(_) => "plan",
            Command::Transport(_) => "transport",
            Command::Stability(_) => "stability",
            Command::HeisSuite(_) => "heis-suite",
        }
    }
}

#[derive(Debug, Args, Default)]
pub struct Theorem1Args {
    /// Bundled cloud: square, circle, half-atom, disk.
    #[arg(long)]
    pub fixture: Option<String>,
    /// Measure file; replaces the fixture.
    #[arg(long, value_name = "FILE")]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub particles: Option<usize>,
}

#[derive(Debug, Args, Default)]
pub struct McpArgs {
    /// Space tag: heis<n>, euclid<d>, sphere2 or cone.
    #[arg(long)]
    pub space: Option<String>,
    /// Cone angle.
    #[arg(long)]
    pub theta: Option<f64>,
    /// `auto`, `haar`, `uniform`, `surface` or a measure file.
    #[arg(long)]
    pub measure: Option<String>,
    #[arg(long)]
    pub particles: Option<usize>,
    /// Curvature bound; only 0 is supported.
    #[arg(long = "K", allow_hyphen_values = true)]
    pub k: Option<f64>,
    /// Dimension bound of the profile (1−t)^N.
    #[arg(long = "N", allow_hyphen_values = true)]
    pub n: Option<f64>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub fd_step: Option<f64>,
    #[arg(long)]
    pub slack: Option<f64>,
    /// `auto`, `jacobian` or `neighborhood`.
    #[arg(long)]
    pub estimator: Option<String>,
    /// Check the strong form, probing preimages of balls.
    #[arg(long)]
    pub strong: bool,
}

#[derive(Debug, Args, Default)]
pub struct PlanArgs {
    /// Builder: convex, heisenberg, sphere or cone-apex.
    #[arg(long)]
    pub build: Option<String>,
    /// Center coordinates, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub center: Option<Vec<f64>>,
    /// Convex body file (JSON); the unit square when absent.
    #[arg(long, value_name = "FILE")]
    pub body: Option<PathBuf>,
    /// `auto` or a measure file.
    #[arg(long)]
    pub measure: Option<String>,
    #[arg(long)]
    pub particles: Option<usize>,
    /// Verify the plan; with FILE, verify a saved plan instead of building one.
    #[arg(long, value_name = "FILE", num_args = 0..=1)]
    pub verify: Option<Option<PathBuf>>,
    /// Density `f(x0, x1, ...)` multiplying the plan.
    #[arg(long, value_name = "EXPR")]
    pub rescale: Option<String>,
    /// Build on the ball of radius R around the center, then extend radially.
    #[arg(long, value_name = "R", num_args = 0..=1, default_missing_value = "0.25")]
    pub extend: Option<f64>,
    /// ε-isometry spec (JSON) to push the plan through.
    #[arg(long, value_name = "MAPFILE")]
    pub push: Option<PathBuf>,
    #[arg(long)]
    pub cell_size: Option<f64>,
}

#[derive(Debug, Args, Default)]
pub struct TransportArgs {
    #[arg(long)]
    pub space: Option<String>,
    /// Bundled instance: random or two-pair.
    #[arg(long)]
    pub fixture: Option<String>,
    #[arg(long, value_name = "FILE")]
    pub mu0: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub mu1: Option<PathBuf>,
    /// Atoms per side of random instances.
    #[arg(long)]
    pub atoms: Option<usize>,
}

#[derive(Debug, Args, Default)]
pub struct StabilityArgs {
    /// Map spec such as `snap:0.01`, `scale:0.5`, `rotate:0.3`.
    #[arg(long)]
    pub map: Option<String>,
    /// ε-isometry spec file; replaces `--map`.
    #[arg(long, value_name = "MAPFILE")]
    pub push: Option<PathBuf>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub particles: Option<usize>,
    #[arg(long)]
    pub cell_size: Option<f64>,
}

#[derive(Debug, Args, Default)]
pub struct HeisSuiteArgs {
    /// Samples of the round-trip and collinearity checks.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Random pairs of the cut-locus scan.
    #[arg(long)]
    pub pairs: Option<usize>,
}
