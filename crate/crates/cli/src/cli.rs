use std::net::SocketAddr;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use savcd_core::augment::DEFAULT_NOISE_STEP;
use savcd_core::engine::ThresholdMode;
use savcd_core::AugmentationKind;

use crate::config::RunOptions;

#[derive(Debug, Parser)]
#[command(
    name = "savcd",
    version,
    about = "Self-augmented visual contrastive decoding"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Decode one query against a scripted or HTTP backend.
    #[command(allow_negative_numbers = true)]
    Decode(DecodeArgs),
    /// Run a threshold-mode grid over a benchmark suite and print CSV.
    #[command(allow_negative_numbers = true)]
    Ablate(AblateArgs),
    /// Apply one augmentation to a PNG image.
    Augment(AugmentArgs),
    /// Serve a synthetic script over HTTP until interrupted.
    ServeStub(ServeArgs),
    /// Write the bundled demo assets to a directory.
    ExportDemo(ExportArgs),
}

#[derive(Debug, Args)]
pub struct DecodeArgs {
    #[command(flatten)]
    pub options: RunOptions,

    /// TOML file with the same keys as the flags; flags win.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Print the resolved configuration as TOML and exit.
    #[arg(long)]
    pub dump_config: bool,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    /// Benchmark suite (JSON). Defaults to the bundled hallucination-injection suite.
    #[arg(long, value_name = "PATH")]
    pub suite: Option<PathBuf>,

    /// Grid spec (TOML with `modes`, `gammas`, `betas`, `alpha`); flags win.
    #[arg(long, value_name = "PATH")]
    pub grid: Option<PathBuf>,

    #[arg(long, value_name = "MODES", value_delimiter = ',')]
    pub modes: Option<Vec<ThresholdMode>>,

    #[arg(
        long,
        value_name = "F,..",
        value_delimiter = ',',
        allow_hyphen_values = true
    )]
    pub gammas: Option<Vec<f64>>,

    #[arg(long, value_name = "F,..", value_delimiter = ',')]
    pub betas: Option<Vec<f64>>,

    #[arg(long, value_name = "F")]
    pub alpha: Option<f64>,

    /// Write CSV here instead of stdout.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AugmentArgs {
    #[arg(long, value_name = "PATH")]
    pub image: PathBuf,

    #[arg(long, value_name = "KIND")]
    pub augmentation: AugmentationKind,

    #[arg(long, value_name = "U64", default_value_t = 0)]
    pub seed: u64,

    /// Diffusion step for `noise`.
    #[arg(long, value_name = "N", default_value_t = DEFAULT_NOISE_STEP)]
    pub step: u32,

    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, value_name = "PATH")]
    pub script: PathBuf,

    /// Clean image that selects the expert rows. Defaults to the built-in test card.
    #[arg(long, value_name = "PATH")]
    pub image: Option<PathBuf>,

    #[arg(long, value_name = "ADDR", default_value = "127.0.0.1:8080")]
    pub addr: SocketAddr,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long, value_name = "DIR")]
    pub dir: PathBuf,
}
