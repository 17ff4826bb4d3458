//! `tempanchor`: anchor-similarity time series from the command line.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "tempanchor", version, about = "Anchor-similarity time series and their classifiers")]
struct Cli {
    /// Seed for every random draw (falls back to TEMPANCHOR_SEED).
    #[arg(long, global = true, env = "TEMPANCHOR_SEED", default_value_t = 0)]
    seed: u64,

    /// Upper bound on concurrent jobs; 0 uses every available core.
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a seeded synthetic corpus (and optionally its anchor pool).
    Synth(SynthArgs),
    /// Average the condition-class posts of a pool into an anchor.
    Anchor(AnchorArgs),
    /// Turn a corpus into per-user series.
    Series(SeriesArgs),
    /// Extract catalog features from scalar series.
    Features(FeaturesArgs),
    /// Rank features by random-forest Gini importance and keep the top k.
    Select(SelectArgs),
    /// Train a classifier and move its threshold on validation data.
    Train(TrainArgs),
    /// Score a trained model at its validation threshold.
    Eval(EvalArgs),
    /// Chunked majority-vote baseline.
    Baseline(BaselineArgs),
    /// Ordered-versus-permuted experiment from a manifest.
    Permute(ManifestArgs),
    /// Cross-disorder transfer experiment from a manifest.
    Transfer(ManifestArgs),
    /// Anchor-free multichannel ablation from a manifest.
    Ablate(ManifestArgs),
    /// FLOPs of one forward pass.
    Flops(FlopsArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Magnitude,
    Trend,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long, value_enum, default_value_t = ModeArg::Magnitude)]
    mode: ModeArg,
    #[arg(long, default_value_t = 100)]
    n_condition: usize,
    #[arg(long, default_value_t = 100)]
    n_control: usize,
    #[arg(long, default_value_t = 8)]
    dim: usize,
    /// Posts per user.
    #[arg(long, default_value_t = 50)]
    posts: usize,
    /// Log-normal spread of post counts; 0 gives every user exactly `--posts`.
    #[arg(long, default_value_t = 0.0)]
    post_spread: f64,
    #[arg(long, default_value_t = 0.8)]
    signal: f64,
    /// Share of a condition user's posts inside the signal episode.
    #[arg(long, default_value_t = 0.5)]
    episode: f64,
    #[arg(long, default_value = "synthetic")]
    disorder: String,
    /// Independent user population under the same hidden direction.
    #[arg(long, default_value_t = 0)]
    cohort: u64,
    /// Place the hidden direction at `--related-cosine` to the one drawn by this seed.
    #[arg(long)]
    related_seed: Option<u64>,
    #[arg(long, default_value_t = 0.8)]
    related_cosine: f64,
    #[arg(long)]
    out: PathBuf,
    /// Also write an all-signal condition pool for anchor estimation.
    #[arg(long)]
    pool_out: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    pool_users: usize,
    #[arg(long, default_value_t = 50)]
    pool_posts: usize,
    /// Write the hidden direction and trend pairing as JSON.
    #[arg(long)]
    truth_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct AnchorArgs {
    /// Corpus whose condition-class posts form the anchor.
    #[arg(long)]
    pool: PathBuf,
    /// Overrides the disorder tag taken from the pool.
    #[arg(long)]
    disorder: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SeriesMode {
    /// Cosine similarity to the anchor.
    Anchor,
    /// Raw embeddings, one channel per dimension.
    Direct,
    /// Per-post channel vectors from `--channels`.
    Channels,
}

#[derive(Debug, Args)]
struct SeriesArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, required_if_eq("mode", "anchor"))]
    anchor: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = SeriesMode::Anchor)]
    mode: SeriesMode,
    #[arg(long, required_if_eq("mode", "channels"))]
    channels: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Also write `user_id,label,step,channel,value` rows.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct FeaturesArgs {
    #[arg(long)]
    series: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SelectArgs {
    #[arg(long)]
    features: PathBuf,
    #[arg(long, default_value_t = 30)]
    top_k: usize,
    #[arg(long, default_value_t = 100)]
    trees: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModelArg {
    Feedforward,
    Cnn1d,
    Lstm,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long, value_enum)]
    model: ModelArg,
    /// Training series (lstm, cnn1d).
    #[arg(long, conflicts_with = "features", required_unless_present = "features")]
    series: Option<PathBuf>,
    /// Training feature rows (feedforward).
    #[arg(long)]
    features: Option<PathBuf>,
    /// Validation file of the same kind; without it 20% of the training
    /// users are held out, stratified by class.
    #[arg(long)]
    val: Option<PathBuf>,
    /// Selection report for feature models; without it the top 30 features
    /// are ranked on the training rows.
    #[arg(long)]
    selection: Option<PathBuf>,
    /// Full model spec as JSON; overrides `--hidden` and the defaults.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// LSTM hidden width.
    #[arg(long, default_value_t = 64)]
    hidden: usize,
    /// Learning rate [default: 1e-3 feedforward and cnn1d, 1e-2 lstm].
    #[arg(long)]
    lr: Option<f64>,
    /// Batch size [default: 16 feedforward and cnn1d, 8 lstm].
    #[arg(long)]
    batch_size: Option<usize>,
    /// Epoch budget [default: 200 feedforward, 50 cnn1d and lstm].
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long, default_value_t = 10)]
    patience: usize,
    #[arg(long)]
    out: PathBuf,
    /// Also write `epoch,train_loss,val_loss` rows.
    #[arg(long)]
    history_csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, conflicts_with = "features", required_unless_present = "features")]
    series: Option<PathBuf>,
    #[arg(long)]
    features: Option<PathBuf>,
    /// Overrides the threshold stored in the checkpoint.
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write `user_id,label,probability,predicted` rows.
    #[arg(long)]
    predictions_csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TieArg {
    Control,
    Condition,
}

#[derive(Debug, Args)]
struct BaselineArgs {
    /// Users to classify.
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    anchor: PathBuf,
    /// Users whose chunks set the vote threshold.
    #[arg(long, required_unless_present = "threshold")]
    val: Option<PathBuf>,
    /// Fixed chunk threshold instead of one moved on `--val`.
    #[arg(long)]
    threshold: Option<f64>,
    /// Posts per chunk.
    #[arg(long, default_value_t = 35)]
    chunk_size: usize,
    #[arg(long, value_enum, default_value_t = TieArg::Control)]
    tie: TieArg,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ManifestArgs {
    #[arg(long)]
    manifest: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FlopsModel {
    Feedforward,
    Cnn1d,
    Lstm,
    Transformer,
}

#[derive(Debug, Args)]
struct FlopsArgs {
    #[arg(long, value_enum)]
    model: FlopsModel,
    /// Feedforward layer widths, e.g. `30,64,32,2`.
    #[arg(long, value_delimiter = ',', default_value = "30,64,32,2")]
    spec: Vec<usize>,
    /// Model spec JSON (cnn1d, lstm, feedforward); overrides `--spec`.
    #[arg(long)]
    spec_file: Option<PathBuf>,
    /// Input channels (cnn1d, lstm).
    #[arg(long, default_value_t = 1)]
    in_channels: usize,
    /// Sequence length (lstm).
    #[arg(long, default_value_t = 50)]
    seq_len: usize,
    #[arg(long, default_value_t = 64)]
    hidden: usize,
    #[arg(long, default_value_t = 110_000_000)]
    n_params: u64,
    #[arg(long, default_value_t = 12)]
    n_layer: u64,
    #[arg(long, default_value_t = 512)]
    n_context: u64,
    #[arg(long, default_value_t = 768)]
    d_model: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<tempanchor_core::Error>() {
            return e.exit_code() as u8;
        }
        if cause.is::<std::io::Error>() {
            return 2;
        }
    }
    1
}

/// `{:#}` without repeating causes that a message already spells out.
fn render(err: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in err.chain() {
        let text = cause.to_string();
        if out.contains(&text) {
            continue;
        }
        if !out.is_empty() {
            out.push_str(": ");
        }
        out.push_str(&text);
    }
    out
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", render(&err));
            ExitCode::from(exit_code(&err))
        }
    }
}
