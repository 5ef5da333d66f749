use std::path::Path;

use serde::Serialize;
use stainscope::ae::{save_model, train_autoencoder};
use stainscope::imaging::io::load_rgb;
use stainscope::imaging::{morphological_gradient, random_border_crops, tissue_mask};
use stainscope::manifest::{DatasetManifest, SlideDiagnosis, Split};
use stainscope::synth::derive_seed;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::pipeline::ensure_dir;
use crate::report::write_json;

pub const MODEL_FILE: &str = "model.sae";
pub const LOG_FILE: &str = "training_log.csv";
pub const SUMMARY_FILE: &str = "train_summary.json";

#[derive(Serialize)]
struct TrainSummary {
    slides: usize,
    windows: usize,
    n_train: usize,
    n_val: usize,
    best_epoch: usize,
    initial_train_loss: f64,
    best_val_loss: f64,
    stopped_early: bool,
}

pub fn run(manifest: &Path, out_dir: &Path, model_path: Option<&Path>, cfg: &RunConfig) -> CliResult<()> {
    let m = DatasetManifest::load(manifest)?;
    let healthy: Vec<(usize, _)> = m
        .slides
        .iter()
        .enumerate()
        .filter(|(_, s)| s.diagnosis == SlideDiagnosis::Negative && s.split == Split::Train)
        .collect();
    if healthy.is_empty() {
        return Err(CliError::Config("manifest has no negative slides in the train split".into()));
    }
    let mut windows = Vec::new();
    for (i, s) in &healthy {
        let img = load_rgb(&m.resolve(&s.image_path))?;
        let tissue = tissue_mask(&img, &cfg.tissue)?;
        let border = morphological_gradient(&tissue.mask, cfg.se_radius);
        let seed = derive_seed(cfg.seed, *i as u64);
        windows.extend(random_border_crops(&img, &border, cfg.crops_per_slide, seed, &s.slide_id)?);
    }
    log::info!("training on {} windows from {} slides", windows.len(), healthy.len());
    let (model, log) = train_autoencoder(&windows, &cfg.train_config())?;

    ensure_dir(out_dir)?;
    let default_path = out_dir.join(MODEL_FILE);
    let path = model_path.unwrap_or(&default_path);
    save_model(&model, path)?;
    let log_path = out_dir.join(LOG_FILE);
    std::fs::write(&log_path, log.to_csv()).map_err(|e| CliError::write(&log_path, e))?;
    let best = log.best().map(|e| e.val_loss).unwrap_or(f64::NAN);
    write_json(
        &out_dir.join(SUMMARY_FILE),
        &TrainSummary {
            slides: healthy.len(),
            windows: windows.len(),
            n_train: log.n_train,
            n_val: log.n_val,
            best_epoch: log.best_epoch,
            initial_train_loss: log.initial_train_loss,
            best_val_loss: best,
            stopped_early: log.stopped_early,
        },
    )?;
    println!(
        "trained on {} windows; best epoch {} (val loss {best:.6}); model written to {}",
        windows.len(),
        log.best_epoch,
        path.display()
    );
    Ok(())
}
