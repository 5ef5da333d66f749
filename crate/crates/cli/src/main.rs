//! `stainscope`: border-patch extraction, autoencoder training, threshold
//! calibration, slide scoring and cross-validation for IHC slide images.

mod commands;
mod config;
mod error;
mod pipeline;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::RunConfig;
use crate::error::{CliError, EXIT_USAGE};

#[derive(Parser, Debug)]
#[command(name = "stainscope", version, about = "Autoencoder screening of brown IHC staining in slide images")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct GlobalArgs {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override a config key, e.g. `--set train.max_epochs=5`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub sets: Vec<String>,
    /// Overrides the config `seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads. Results do not depend on it.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Crop border windows from every manifest slide.
    Extract {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Train the autoencoder on crops from healthy training slides.
    Train {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        /// Model output path; defaults to `<out-dir>/model.sae`.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Learn patch and slide thresholds from training-split annotations.
    Calibrate {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Diagnose one slide image.
    Score {
        #[arg(long)]
        slide: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        thresholds: PathBuf,
        /// Also write `<out-dir>/<slide-id>.json`.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Patient-stratified k-fold evaluation of the autoencoder and the
    /// red-pixel baseline.
    Crossval {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        /// Write `roc.svg` regardless of the config.
        #[arg(long)]
        svg: bool,
    },
    /// Generate a synthetic dataset with ground truth.
    Synth {
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Match a slide's colors to a reference image.
    Colornorm {
        #[arg(long)]
        source: PathBuf,
        #[arg(long)]
        reference: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Stop after the brightness correction.
        #[arg(long)]
        skip_hist: bool,
        /// Overrides the config `lambda`.
        #[arg(long)]
        lambda: Option<f64>,
    },
    /// Patients needed to show an AUC above a null value.
    Samplesize {
        #[arg(long)]
        auc_null: f64,
        #[arg(long)]
        auc_alt: f64,
        #[arg(long, default_value_t = 0.8)]
        power: f64,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Positives per negative, as `p:n` or a number.
        #[arg(long, default_value = "1")]
        ratio: String,
    },
    /// Finite-difference check of every layer type and the full network.
    Gradcheck {
        /// Spatial input size (multiple of 4).
        #[arg(long, default_value_t = 16)]
        size: usize,
        #[arg(long, default_value_t = 1e-3)]
        tol: f64,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Print the effective configuration as TOML.
    Config,
}

fn init_logging() {
    let env = env_logger::Env::new().filter_or("STAINSCOPE_LOG", "warn");
    let _ = env_logger::Builder::from_env(env).format_timestamp(None).try_init();
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.global.jobs {
        if n == 0 {
            return Err(CliError::Usage("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let mut cfg = RunConfig::load(cli.global.config.as_deref(), &cli.global.sets)?;
    if let Some(seed) = cli.global.seed {
        cfg.seed = seed;
    }
    commands::dispatch(cli.command, &cfg)
}

fn main() -> ExitCode {
    init_logging();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
