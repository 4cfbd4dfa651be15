mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use polarscale::svd::Weighting;
use polarscale::ErrorKind;

#[derive(Parser, Debug)]
#[command(name = "polarscale", version, about = "Latent semantic scaling with word2vec and SVD embeddings")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
pub struct GlobalArgs {
    /// Root seed for every random stream.
    #[arg(long, global = true, default_value_t = polarscale::rng::DEFAULT_SEED)]
    pub seed: u64,
    /// Worker threads for scoring and grid conditions.
    #[arg(long, global = true, env = "POLARSCALE_THREADS", default_value_t = 1)]
    pub threads: usize,
    /// More log output on stderr (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Args, Debug, Clone)]
pub struct TokenizerArgs {
    /// Minimum corpus frequency for a term to enter the vocabulary.
    #[arg(long, default_value_t = polarscale::corpus::DEFAULT_MIN_COUNT)]
    pub min_count: u64,
    /// Keep purely numeric tokens.
    #[arg(long)]
    pub keep_numbers: bool,
    /// File with one stopword per line.
    #[arg(long)]
    pub stopwords: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train an embedding model on a corpus.
    Train(TrainArgs),
    /// Score documents, or combine two score tables.
    Score(ScoreArgs),
    /// Rank a grid of word2vec configurations by seed perplexity.
    Optimize(OptimizeArgs),
    /// Benchmark against a dictionary and smooth score time series.
    Evaluate(EvaluateArgs),
    /// Show a model's header or the context words most predictive of a term.
    Inspect(InspectArgs),
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// sg, cbow or svd.
    #[arg(long, default_value = "sg")]
    pub algo: String,
    #[arg(long, default_value_t = 100)]
    pub k: usize,
    /// Context window; defaults to 10 for SG and 5 for CBOW.
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long, default_value_t = 0.05)]
    pub lr: f64,
    #[arg(long, default_value_t = 10)]
    pub epochs: usize,
    #[arg(long, default_value_t = 5)]
    pub negatives: usize,
    /// Frequent-word subsampling threshold (off by default).
    #[arg(long)]
    pub subsample: Option<f64>,
    /// Sentence-term weighting for SVD: count or log-count.
    #[arg(long, default_value = "count")]
    pub weighting: Weighting,
    /// Lock-free multi-threaded training. Results are not reproducible.
    #[arg(long)]
    pub hogwild: bool,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write a text export of the input-layer vectors.
    #[arg(long)]
    pub text_out: Option<PathBuf>,
    #[command(flatten)]
    pub tokenizer: TokenizerArgs,
}

#[derive(Args, Debug)]
pub struct ScoreArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Seed patterns, one per line, optionally followed by a polarity.
    #[arg(long)]
    pub seeds: Option<PathBuf>,
    /// Dictionary patterns for dictionary mode.
    #[arg(long)]
    pub dictionary: Option<PathBuf>,
    /// spatial, probabilistic or dictionary.
    #[arg(long, default_value = "probabilistic")]
    pub mode: polarscale::scaling::PolarityKind,
    /// Allow negative seed polarities.
    #[arg(long)]
    pub bipolar: bool,
    /// Skip documents with fewer in-vocabulary tokens.
    #[arg(long, default_value_t = 1)]
    pub min_tokens: u64,
    /// Geometric mean of two existing score tables.
    #[arg(long, num_args = 2, value_names = ["A", "B"])]
    pub combine: Option<Vec<PathBuf>>,
    /// Word polarity export.
    #[arg(long)]
    pub word_scores: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub tokenizer: TokenizerArgs,
}

#[derive(Args, Debug)]
pub struct OptimizeArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub seeds: PathBuf,
    /// Grid file with one `algorithm=SG k=100 ...` configuration per line.
    #[arg(long)]
    pub grid: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub tokenizer: TokenizerArgs,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Full dictionary the seed samples are drawn from.
    #[arg(long)]
    pub dictionary: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    pub samples: usize,
    #[arg(long, default_value_t = 10)]
    pub sample_size: usize,
    /// Model grid; defaults to the 12-configuration SG/CBOW grid.
    #[arg(long)]
    pub grid: Option<PathBuf>,
    #[arg(long, default_value = "count")]
    pub weighting: Weighting,
    #[arg(long, default_value_t = 1)]
    pub min_tokens: u64,
    /// Benchmark result table.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Score table to aggregate into daily series.
    #[arg(long)]
    pub scores: Option<PathBuf>,
    /// Keyword group as name=kw1,kw2 (repeatable; first match wins).
    #[arg(long = "groups", value_name = "NAME=KW,...")]
    pub groups: Vec<String>,
    /// Smoothed series export.
    #[arg(long)]
    pub series_out: Option<PathBuf>,
    /// Kernel standard deviation in days.
    #[arg(long, default_value_t = 14.0)]
    pub bandwidth: f64,
    #[arg(long, default_value_t = 500)]
    pub n_boot: usize,
    #[command(flatten)]
    pub tokenizer: TokenizerArgs,
}

#[derive(Args, Debug)]
pub struct InspectArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// List the context words most likely to predict this term.
    #[arg(long)]
    pub target: Option<String>,
    #[arg(long, default_value_t = 20)]
    pub top: usize,
    /// Write the input-layer vectors as text.
    #[arg(long)]
    pub text_out: Option<PathBuf>,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let kind = err
        .chain()
        .find_map(|e| e.downcast_ref::<polarscale::Error>())
        .map(polarscale::Error::kind);
    match kind {
        Some(ErrorKind::Config) => 2,
        Some(ErrorKind::Data) => 3,
        Some(ErrorKind::Training) => 4,
        None => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.global.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let threads = cli.global.threads.max(1);
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
        log::warn!("could not configure thread pool: {e}");
    }

    let result = match &cli.command {
        Command::Train(args) => commands::train(&cli.global, args),
        Command::Score(args) => commands::score(args),
        Command::Optimize(args) => commands::optimize(&cli.global, args),
        Command::Evaluate(args) => commands::evaluate(&cli.global, args),
        Command::Inspect(args) => commands::inspect(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let mut message = String::new();
            for cause in e.chain().map(ToString::to_string) {
                if !message.ends_with(&cause) {
                    if !message.is_empty() {
                        message.push_str(": ");
                    }
                    message.push_str(&cause);
                }
            }
            eprintln!("error: {message}");
            ExitCode::from(exit_code(&e))
        }
    }
}
