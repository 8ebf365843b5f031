mod commands;
mod config;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Barrier proximal interior-point deblurring and its unfolded network.
#[derive(Debug, Parser)]
#[command(name = "unfold-ipm", version, about)]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// JSON run configuration; flags given on the command line take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for every random draw (noise, shuffling, Monte-Carlo pairs).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Blur kernel: gaussian:<std>[:<size>], uniform:<size>, identity, or file:<path>.
    #[arg(long, global = true)]
    pub kernel: Option<String>,
    /// Noise standard deviation, fixed (<v>) or drawn per image (<lo>:<hi>).
    #[arg(long, global = true)]
    pub sigma: Option<String>,
    /// Comma-separated regularization weights for var-search.
    #[arg(long, global = true)]
    pub lambda_grid: Option<String>,
    /// Number of unfolded layers to train.
    #[arg(long, global = true)]
    pub layers: Option<usize>,
    /// Frame width (pixels) left out of SSIM/PSNR.
    #[arg(long, global = true)]
    pub border_exclude: Option<usize>,
    /// Keep kernel files as given instead of normalizing them to unit sum.
    #[arg(long, global = true)]
    pub no_normalize: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write procedural ground-truth scenes as PNG files.
    Synth {
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 25)]
        count: usize,
        #[arg(long, default_value_t = 48)]
        size: usize,
        #[arg(long, default_value_t = 1)]
        channels: usize,
    },
    /// Blur and add noise to every PNG of a directory (or a single file).
    Degrade {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Restore one image with the reference interior-point solver.
    Solve {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// CSV of iteration, objective, min_margin.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        lambda: Option<f64>,
    },
    /// Pick the regularization weight with the best SSIM against the truth.
    VarSearch {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Greedy layer-wise training.
    Train {
        /// Directory of ground-truth PNGs.
        #[arg(long)]
        truth: PathBuf,
        /// Matching degraded PNGs (same file names); degraded on the fly when omitted.
        #[arg(long)]
        degraded: Option<PathBuf>,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Run a trained model on degraded images.
    Infer {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Ground truth (same file names) for the metrics CSV.
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long)]
        metrics: Option<PathBuf>,
        /// Per-layer gamma, mu, lambda.
        #[arg(long)]
        layers_csv: Option<PathBuf>,
    },
    /// Averagedness certificate of a model on a quadratic problem.
    Certify {
        #[arg(long)]
        model: PathBuf,
        /// JSON problem description.
        #[arg(long)]
        problem: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// SSIM/PSNR of image pairs.
    Metrics {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(commands::Failure::Usage(e)) => {
            eprintln!("usage error: {e:#}");
            ExitCode::from(1)
        }
        Err(commands::Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
