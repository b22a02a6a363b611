//! `ctam`: encode, decode, guide, analyze, sweep and train from the shell.
//!
//! Exit status is 0 on success, 1 for usage errors and 2 for data errors.
//! Errors go to standard error as `ERROR:<code>: <message>`.

mod commands;
mod config;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use config::parse_grid;

#[derive(Parser, Debug)]
#[command(name = "ctam", version, about = "Attention-guided image codec and ViT analysis toolkit")]
pub struct Cli {
    /// JSON job file; flags given on the command line take precedence
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Seed for synthetic data, model and adapter initialisation
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Compress a PPM image into a .ctam bitstream
    Encode(EncodeArgs),
    /// Decompress a .ctam bitstream into a PPM image
    Decode(DecodeArgs),
    /// Compute a guidance map from shallow-layer CLS attention
    Guide(GuideArgs),
    /// Write attention-distance, similarity, flow and PCA reports
    Analyze(AnalyzeArgs),
    /// Encode at several presets and write a preset,bpp,psnr CSV
    RdSweep(RdSweepArgs),
    /// Train the decoder-side latent adapter against a frozen model
    TrainAdapter(TrainArgs),
    /// BD-rate of a test RD curve against an anchor curve
    BdRate(BdRateArgs),
    /// Write a seeded random ViT weight container
    ToyModel(ToyModelArgs),
}

/// Options shared by every command that derives guidance from a model.
#[derive(Args, Debug, Default)]
pub struct GuidanceOpts {
    /// Weight container (.ctwt) of the guiding ViT
    #[arg(long, value_name = "FILE")]
    pub model: Option<PathBuf>,
    /// Threshold multiplier for mu +- k*sigma quantisation [default: 0.75]
    #[arg(long)]
    pub k: Option<f64>,
    /// Guidance map size [default: 8x8]
    #[arg(long, value_name = "RxC", value_parser = parse_grid)]
    pub grid: Option<(usize, usize)>,
    /// Comma-separated layers whose CLS attention is averaged [default: 0,1,2]
    #[arg(long, value_delimiter = ',')]
    pub layers: Option<Vec<usize>>,
    /// Number of guidance levels, 3 or 5 [default: 3]
    #[arg(long)]
    pub levels: Option<u8>,
    /// Fuse a global map with per-tile maps over an RxC tile layout
    #[arg(long, value_name = "RxC", value_parser = parse_grid)]
    pub tiles: Option<(usize, usize)>,
}

#[derive(Args, Debug)]
pub struct EncodeArgs {
    /// Input PPM image
    #[arg(long = "in", value_name = "FILE")]
    pub input: Option<PathBuf>,
    /// Output bitstream
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Quality preset 0 (smallest) to 9 (best) [default: 6]
    #[arg(long)]
    pub preset: Option<u8>,
    /// Step ratio between adjacent guidance levels [default: 2]
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Compute guidance from --model before coding
    #[arg(long)]
    pub guide: bool,
    /// Use a guidance map JSON written by `guide`
    #[arg(long, value_name = "FILE", conflicts_with = "guide")]
    pub map: Option<PathBuf>,
    #[command(flatten)]
    pub guidance: GuidanceOpts,
}

#[derive(Args, Debug)]
pub struct DecodeArgs {
    /// Input bitstream
    #[arg(long = "in", value_name = "FILE")]
    pub input: Option<PathBuf>,
    /// Output PPM image
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Also write header, guidance and quantised symbols to OUT.latent.json
    #[arg(long)]
    pub dump_latent: bool,
}

#[derive(Args, Debug)]
pub struct GuideArgs {
    /// Input PPM image
    #[arg(long = "in", value_name = "FILE")]
    pub input: Option<PathBuf>,
    /// Output map JSON (standard output when omitted)
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub guidance: GuidanceOpts,
}

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    /// Original PPM image
    #[arg(long, value_name = "FILE")]
    pub a: Option<PathBuf>,
    /// Reconstructed PPM image compared against --a
    #[arg(long, value_name = "FILE")]
    pub b: Option<PathBuf>,
    /// Weight container (.ctwt)
    #[arg(long, value_name = "FILE")]
    pub model: Option<PathBuf>,
    /// Output directory
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Principal components kept for the token PCA
    #[arg(long, default_value_t = 2)]
    pub components: usize,
}

#[derive(Args, Debug)]
pub struct RdSweepArgs {
    /// Input PPM images; per-preset results are averaged over them
    #[arg(long = "in", value_name = "FILE", num_args = 1..)]
    pub inputs: Vec<PathBuf>,
    /// Comma-separated presets [default: 0..9]
    #[arg(long, value_delimiter = ',')]
    pub presets: Option<Vec<u8>>,
    /// Step ratio between adjacent guidance levels [default: 2]
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Compute guidance per image from --model
    #[arg(long)]
    pub guide: bool,
    /// Apply one guidance map JSON to every image
    #[arg(long, value_name = "FILE", conflicts_with = "guide")]
    pub map: Option<PathBuf>,
    /// Output CSV (standard output when omitted)
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub guidance: GuidanceOpts,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Weight container (.ctwt) of the frozen ViT
    #[arg(long, value_name = "FILE")]
    pub model: Option<PathBuf>,
    /// Training images (PPM, model input size)
    #[arg(long = "in", value_name = "FILE", num_args = 1..)]
    pub inputs: Vec<PathBuf>,
    /// Train on this many seeded synthetic images instead
    #[arg(long, value_name = "N")]
    pub synthetic: Option<usize>,
    /// Optimisation steps [default: 200]
    #[arg(long)]
    pub steps: Option<usize>,
    /// Images per step [default: 8]
    #[arg(long)]
    pub batch: Option<usize>,
    /// Adam learning rate [default: 0.001]
    #[arg(long)]
    pub lr: Option<f64>,
    /// Preset used to code the training images [default: 4]
    #[arg(long)]
    pub preset: Option<u8>,
    /// Output adapter weight container
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Loss history CSV [default: OUT.history.csv]
    #[arg(long, value_name = "FILE")]
    pub history: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct BdRateArgs {
    /// Anchor RD curve CSV
    #[arg(long, value_name = "FILE")]
    pub anchor: PathBuf,
    /// Test RD curve CSV
    #[arg(long, value_name = "FILE")]
    pub test: PathBuf,
}

#[derive(Args, Debug)]
pub struct ToyModelArgs {
    /// Output weight container
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Zero the query/key projections so all attention is uniform
    #[arg(long)]
    pub uniform_attention: bool,
    /// Input side in pixels [default: 32]
    #[arg(long)]
    pub image_size: Option<usize>,
    /// Patch side in pixels [default: 8]
    #[arg(long)]
    pub patch_size: Option<usize>,
    /// Token width [default: 32]
    #[arg(long)]
    pub dim: Option<usize>,
    /// Attention heads [default: 4]
    #[arg(long)]
    pub heads: Option<usize>,
    /// Transformer blocks [default: 4]
    #[arg(long)]
    pub depth: Option<usize>,
}

/// Bad invocation: missing or invalid options, or an unusable config file.
#[derive(Debug)]
pub struct Usage(pub String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn error_code(e: &anyhow::Error) -> &'static str {
    for cause in e.chain() {
        if let Some(c) = cause.downcast_ref::<ctam_core::Error>() {
            return c.code();
        }
        if cause.is::<serde_json::Error>() {
            return "format";
        }
        if cause.is::<std::io::Error>() {
            return "io";
        }
    }
    "data"
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.render().to_string();
            let text = text.strip_prefix("error: ").unwrap_or(&text);
            eprint!("ERROR:usage: {text}");
            return ExitCode::from(1);
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if e.downcast_ref::<Usage>().is_some() {
                eprintln!("ERROR:usage: {e:#}");
                ExitCode::from(1)
            } else {
                eprintln!("ERROR:{}: {e:#}", error_code(&e));
                ExitCode::from(2)
            }
        }
    }
}
