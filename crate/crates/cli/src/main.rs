use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod manifest;

#[derive(Parser, Debug)]
#[command(
    name = "hodmd",
    version,
    about = "HODMD analysis, mode export and dataset assembly for image sequences"
)]
struct Cli {
    /// Worker threads for per-sample work
    #[arg(long, global = true, env = "HODMD_JOBS")]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Analyze a frame directory (or a tree of them) and write its spectrum
    Analyze(AnalyzeArgs),
    /// Render the selected modes of analyzed samples as PNG images
    ExportModes(ExportArgs),
    /// Assemble dataset 01 / dataset 02 from a frame corpus
    BuildDataset(BuildArgs),
    /// Generate a synthetic multi-class corpus
    GenSynth(SynthArgs),
}

#[derive(Args, Debug, Clone, serde::Serialize)]
pub struct HodmdArgs {
    /// Delay d (default: 10% of the frame count, rounded up)
    #[arg(long)]
    pub d: Option<usize>,
    /// Relative singular-value cutoff
    #[arg(long, default_value_t = hodmd_core::hodmd::DEFAULT_EPS_SVD)]
    pub eps_svd: f64,
    /// Relative amplitude cutoff for mode retention
    #[arg(long, default_value_t = hodmd_core::hodmd::DEFAULT_EPS_DMD)]
    pub eps_dmd: f64,
}

#[derive(Args, Debug, serde::Serialize)]
pub struct AnalyzeArgs {
    /// Directory of frame_*.png files, or a tree whose leaves are such directories
    pub input: PathBuf,
    /// Seconds between frames
    #[arg(long)]
    pub dt: f64,
    #[command(flatten)]
    pub hodmd: HodmdArgs,
    /// JSON crop file with x0, y0, width, height
    #[arg(long)]
    pub crop: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    Top,
    Manual,
    NoiseFilter,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RenderingArg {
    RealPart,
    Modulus,
    Phase,
}

#[derive(Args, Debug, serde::Serialize)]
pub struct ExportArgs {
    /// Output directory of `analyze` (a single sample or a tree)
    pub spectrum: PathBuf,
    /// Modes per sample
    #[arg(long, default_value_t = hodmd_core::modes::DEFAULT_MODE_COUNT)]
    pub count: usize,
    #[arg(long, value_enum, default_value_t = Strategy::Top)]
    pub strategy: Strategy,
    /// Mode ranks for --strategy manual, e.g. 1,4,7
    #[arg(long, value_delimiter = ',')]
    pub select: Vec<usize>,
    /// Noise-score cutoff for --strategy noise-filter
    #[arg(long, default_value_t = hodmd_core::modes::DEFAULT_NOISE_CUTOFF)]
    pub noise_cutoff: f64,
    #[arg(long, value_enum, default_value_t = RenderingArg::RealPart)]
    pub rendering: RenderingArg,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitModeArg {
    Shuffle,
    Contiguous,
}

#[derive(Args, Debug, serde::Serialize)]
pub struct BuildArgs {
    /// Corpus tree {class}/{source_id}/frame_*.png
    #[arg(long)]
    pub corpus: PathBuf,
    /// `none`, `modes` (analyze the training pool now), or a directory of exported modes
    #[arg(long, default_value = "none")]
    pub augment: String,
    /// Scale factor on frame and mode counts (1 = full size)
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Classes to include, e.g. DC,MI,Ob,HT (default: every corpus class)
    #[arg(long, value_delimiter = ',')]
    pub classes: Vec<String>,
    #[arg(long, value_enum, default_value_t = SplitModeArg::Shuffle)]
    pub split_mode: SplitModeArg,
    /// Start training windows at a seeded random frame instead of the first
    #[arg(long)]
    pub random_start: bool,
    /// JSON crop file applied to every frame (and to the analysis with --augment modes)
    #[arg(long)]
    pub crop: Option<PathBuf>,
    /// Seconds between frames; required with --augment modes
    #[arg(long)]
    pub dt: Option<f64>,
    #[command(flatten)]
    pub hodmd: HodmdArgs,
    /// Modes per sample rendered with --augment modes (default: 10 x scale)
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long, value_enum, default_value_t = RenderingArg::RealPart)]
    pub rendering: RenderingArg,
    /// Where --augment modes writes its mode images (default: {out}/mode_images)
    #[arg(long)]
    pub modes_out: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, serde::Serialize)]
pub struct SynthArgs {
    /// Corpus spec (JSON); defaults to the bundled five-class spec
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Override the spec's seed
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

fn exit_code(err: &commands::CliError) -> u8 {
    use hodmd_core::ErrorKind;
    match err.kind() {
        ErrorKind::Parameter => 2,
        ErrorKind::Data => 3,
        ErrorKind::Numerical => 4,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            eprintln!("error: --jobs must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            log::warn!("could not size the worker pool: {e}");
        }
    }
    let result = match &cli.command {
        Command::Analyze(args) => commands::analyze(args),
        Command::ExportModes(args) => commands::export_modes(args),
        Command::BuildDataset(args) => commands::build_dataset(args),
        Command::GenSynth(args) => commands::gen_synth(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
