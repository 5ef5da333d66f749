mod colornorm;
mod crossval;
mod extract;
mod gradcheck;
mod samplesize;
mod score;
mod synth;
mod train;

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::Command;

/// Contents of the file written by `calibrate`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdsFile {
    pub t_patch: f64,
    pub t_slide: f64,
    pub patch_auc: f64,
    pub slide_auc: f64,
}

impl ThresholdsFile {
    pub fn load(path: &std::path::Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| stainscope::Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

pub fn dispatch(cmd: Command, cfg: &RunConfig) -> CliResult<()> {
    match cmd {
        Command::Extract { manifest, out_dir } => extract::run(&manifest, &out_dir, cfg),
        Command::Train { manifest, out_dir, model } => train::run(&manifest, &out_dir, model.as_deref(), cfg),
        Command::Calibrate { manifest, model, out_dir } => score::calibrate(&manifest, &model, &out_dir, cfg),
        Command::Score {
            slide,
            model,
            thresholds,
            out_dir,
        } => score::run(&slide, &model, &thresholds, out_dir.as_deref(), cfg),
        Command::Crossval {
            manifest,
            model,
            out_dir,
            svg,
        } => crossval::run(&manifest, &model, &out_dir, svg || cfg.svg, cfg),
        Command::Synth { out_dir } => synth::run(&out_dir, cfg),
        Command::Colornorm {
            source,
            reference,
            out,
            skip_hist,
            lambda,
        } => colornorm::run(&source, &reference, &out, skip_hist, lambda.unwrap_or(cfg.lambda), cfg),
        Command::Samplesize {
            auc_null,
            auc_alt,
            power,
            alpha,
            ratio,
        } => samplesize::run(auc_null, auc_alt, power, alpha, &ratio),
        Command::Gradcheck { size, tol, out_dir } => gradcheck::run(size, tol, out_dir.as_deref(), cfg.seed),
        Command::Config => {
            print!("{}", cfg.to_toml());
            Ok(())
        }
    }
}
