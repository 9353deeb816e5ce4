//! `gvt`: pretrain, adapt, inspect and check view-space encoders.

mod commands;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "gvt", version, about = "View-space encoders for node classification")]
pub struct Cli {
    /// Worker threads; 0 picks one per core.
    #[arg(long, global = true, env = "GVT_THREADS", default_value_t = 0)]
    pub threads: usize,
    /// Leave wall-clock timings out of outputs so reruns are byte-identical.
    #[arg(long, global = true)]
    pub deterministic: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Pretrain an encoder and its predictor on one dataset.
    Pretrain(PretrainArgs),
    /// Train a predictor on a frozen encoder, choosing the depth by validation accuracy.
    Adapt(AdaptArgs),
    /// Score an adapted predictor on one split.
    Evaluate(EvaluateArgs),
    /// Search hyperparameters by pretrain, freeze and re-adapt.
    Grid(GridArgs),
    /// Run the property suites.
    Check(CheckArgs),
    /// Dump the stacked view tensor of a dataset.
    Stack(StackArgs),
    /// Gradient heatmaps of φ per view.
    Heatmap(HeatmapArgs),
    /// Paired Wilcoxon signed-rank test.
    Wilcoxon(WilcoxonArgs),
    /// Re-run a command from its manifest.json.
    Replay(ReplayArgs),
    /// Write a synthetic dataset directory.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PredictorArg {
    Linear,
    Mlp,
}

impl From<PredictorArg> for gvt::trainer::PredictorKind {
    fn from(p: PredictorArg) -> Self {
        match p {
            PredictorArg::Linear => gvt::trainer::PredictorKind::Linear,
            PredictorArg::Mlp => gvt::trainer::PredictorKind::Mlp,
        }
    }
}

/// Training hyperparameters; flags override `--config`, which overrides defaults.
#[derive(Debug, Clone, Args)]
pub struct TrainFlags {
    /// JSON file with any subset of the training config fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Hop count.
    #[arg(long = "K")]
    pub hops: Option<u32>,
    /// Layers in φ.
    #[arg(long = "D")]
    pub phi_depth: Option<usize>,
    /// Recurrent depth.
    #[arg(long = "L")]
    pub depth: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub predictor: Option<PredictorArg>,
    /// Hidden width of the MLP predictor.
    #[arg(long)]
    pub hidden: Option<usize>,
    /// Ablation: identity activation inside φ.
    #[arg(long)]
    pub no_nonlinearity: bool,
    /// Ablation: a single GVT application.
    #[arg(long)]
    pub no_recurrence: bool,
    /// Keep view tensors for the backward pass.
    #[arg(long)]
    pub cache_views: bool,
}

#[derive(Debug, Clone, Args)]
pub struct DataFlags {
    /// Dataset directory.
    #[arg(long)]
    pub data: PathBuf,
    /// L1-normalize feature rows after loading.
    #[arg(long)]
    pub normalize: bool,
}

#[derive(Debug, Clone, Args)]
pub struct PretrainArgs {
    #[command(flatten)]
    pub data: DataFlags,
    #[command(flatten)]
    pub train: TrainFlags,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct AdaptArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[command(flatten)]
    pub data: DataFlags,
    #[arg(long, value_enum, default_value = "mlp")]
    pub predictor: PredictorArg,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Train,
    Val,
    Test,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Predictor file written by `adapt`.
    #[arg(long = "predictor-file")]
    pub predictor_file: PathBuf,
    #[command(flatten)]
    pub data: DataFlags,
    #[arg(long, value_enum, default_value = "test")]
    pub split: SplitArg,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct GridArgs {
    #[command(flatten)]
    pub data: DataFlags,
    #[command(flatten)]
    pub train: TrainFlags,
    /// `standard` (72 configs) or a JSON file with hops, phi_depths, depths, lrs.
    #[arg(long, default_value = "standard")]
    pub space: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    All,
    Equivariance,
    Recovery,
    Remainder,
    Gradcheck,
}

#[derive(Debug, Clone, Args)]
pub struct CheckArgs {
    #[arg(long, value_enum, default_value = "all")]
    pub suite: Suite,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Equivariance trials.
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    /// Audit a map that pins feature 0; the equivariance suite must fail.
    #[arg(long)]
    pub negative_control: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct StackArgs {
    #[command(flatten)]
    pub data: DataFlags,
    /// Hop count of the default finder set.
    #[arg(long = "K", default_value_t = 1)]
    pub hops: u32,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct HeatmapArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[command(flatten)]
    pub data: DataFlags,
    #[arg(long, default_value_t = 1)]
    pub depth: usize,
    /// `all` or a comma-separated list of view indices.
    #[arg(long, default_value = "all")]
    pub views: String,
    #[arg(long, default_value_t = 64)]
    pub nodes: usize,
    #[arg(long, default_value_t = 64)]
    pub features: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct WilcoxonArgs {
    /// CSV with header `dataset,<method a>,<method b>`.
    #[arg(long)]
    pub pairs: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Write to this directory instead of the recorded one.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SynthKind {
    /// Contextual stochastic block model.
    Csbm,
    /// Disjoint paths whose label sits several hops from its signal.
    HopChain,
    /// The three-node path used in the docs.
    Path,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long, value_enum, default_value = "csbm")]
    pub kind: SynthKind,
    /// Nodes (csbm) or paths (hop-chain).
    #[arg(long, default_value_t = 600)]
    pub nodes: usize,
    #[arg(long, default_value_t = 32)]
    pub features: usize,
    #[arg(long, default_value_t = 3)]
    pub classes: usize,
    /// Fraction of csbm edges that join nodes of the same class.
    #[arg(long, default_value_t = 0.8)]
    pub homophily: f64,
    /// Hops between label and signal in hop-chain.
    #[arg(long, default_value_t = 3)]
    pub distance: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

fn configure_threads(threads: usize) -> CliResult<()> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::usage(format!("thread pool: {e}")))
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() {
                error::EXIT_USAGE as u8
            } else {
                0
            });
        }
    };
    let result = configure_threads(cli.threads).and_then(|_| commands::run(cli, argv[1..].to_vec()));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}
