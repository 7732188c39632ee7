use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use postln_lens::model::LensMode;

#[derive(Debug, Parser)]
#[command(name = "lenskit", version, about = "Zero-ablation logit lens toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Create model weights.
    #[command(subcommand)]
    Model(ModelCmd),
    /// Create board positions.
    #[command(subcommand)]
    Positions(PositionsCmd),
    /// Per-stage lens policies.
    #[command(subcommand)]
    Lens(LensCmd),
    /// Check the residual decomposition against the forward pass.
    #[command(subcommand)]
    Decomp(DecompCmd),
    /// Percentile bands of policy metrics.
    #[command(subcommand)]
    Metrics(MetricsCmd),
    /// Forced-win puzzles.
    #[command(subcommand)]
    Puzzles(PuzzlesCmd),
    /// Round-robin games between lens stages.
    Tournament(TournamentArgs),
    /// Fit Elo ratings to a results file.
    Elo(EloArgs),
    /// Render metric band CSVs as SVG charts.
    Chart(ChartArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Default,
    KeepBeta,
}

impl From<ModeArg> for LensMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Default => LensMode::Default,
            ModeArg::KeepBeta => LensMode::KeepBeta,
        }
    }
}

#[derive(Debug, Args)]
pub struct OutArg {
    /// Output directory; created if missing.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum ModelCmd {
    Init {
        /// Model config JSON; the toy config when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        out: OutArg,
    },
}

#[derive(Debug, Subcommand)]
pub enum PositionsCmd {
    Gen {
        #[arg(long, default_value_t = 20)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 4)]
        min_ply: u32,
        #[arg(long, default_value_t = 60)]
        max_ply: u32,
        #[command(flatten)]
        out: OutArg,
    },
}

#[derive(Debug, Subcommand)]
pub enum LensCmd {
    Sweep {
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        positions: PathBuf,
        #[arg(long, value_enum, default_value = "default")]
        mode: ModeArg,
        #[command(flatten)]
        out: OutArg,
    },
}

#[derive(Debug, Subcommand)]
pub enum DecompCmd {
    Verify {
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        positions: PathBuf,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long, value_enum, default_value = "default")]
        mode: ModeArg,
        #[command(flatten)]
        out: OutArg,
    },
}

#[derive(Debug, Subcommand)]
pub enum MetricsCmd {
    /// One CSV per metric from a lens report.
    Compute {
        #[arg(long)]
        report: PathBuf,
        #[arg(long, default_value_t = 5)]
        top_k: usize,
        #[command(flatten)]
        out: OutArg,
    },
    /// Per-layer FFN output norms of the full model.
    MlpNorm {
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        positions: PathBuf,
        #[command(flatten)]
        out: OutArg,
    },
}

#[derive(Debug, Subcommand)]
pub enum PuzzlesCmd {
    Gen {
        #[arg(long, default_value_t = 100)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Winner's moves per puzzle.
        #[arg(long, default_value_t = 2)]
        depth: u32,
        #[command(flatten)]
        out: OutArg,
    },
    Eval {
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        puzzles: PathBuf,
        /// Comma-separated stages, or `all`.
        #[arg(long, default_value = "all", allow_hyphen_values = true)]
        stages: String,
        #[arg(long, value_enum, default_value = "default")]
        mode: ModeArg,
        #[command(flatten)]
        out: OutArg,
    },
}

#[derive(Debug, Args)]
pub struct TournamentArgs {
    #[arg(long)]
    pub weights: PathBuf,
    /// Comma-separated stages, or `all`.
    #[arg(long, default_value = "all", allow_hyphen_values = true)]
    pub stages: String,
    /// Games per pairing.
    #[arg(long, default_value_t = 10)]
    pub games: usize,
    #[arg(long, default_value_t = 10)]
    pub opening_plies: u32,
    #[arg(long, default_value_t = 1.0)]
    pub temperature: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "default")]
    pub mode: ModeArg,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Debug, Args)]
pub struct EloArgs {
    /// Results CSV (`white_id,black_id,outcome`).
    #[arg(long)]
    pub results: PathBuf,
    /// Participant pinned to `--anchor-value`; the first listed when omitted.
    #[arg(long)]
    pub anchor: Option<String>,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub anchor_value: f64,
    #[arg(long, default_value_t = 100.0)]
    pub draw_elo: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub advantage: f64,
    #[arg(long, default_value_t = 0.5)]
    pub prior_games: f64,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Debug, Args)]
pub struct ChartArgs {
    /// Directory of metric CSVs written by `metrics compute`.
    #[arg(long)]
    pub metrics: PathBuf,
    #[command(flatten)]
    pub out: OutArg,
}
