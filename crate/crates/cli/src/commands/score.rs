use std::path::Path;

use serde::Serialize;
use stainscope::ae::load_model;
use stainscope::detect::{score_slide, Diagnosis, Thresholds};
use stainscope::imaging::io::load_rgb;
use stainscope::manifest::{DatasetManifest, Split};
use stainscope::stats::{positive_percentage, roc_curve};
use stainscope::Error;

use super::ThresholdsFile;
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::pipeline::{ensure_dir, score_slides};
use crate::report::write_json;

pub const THRESHOLDS_FILE: &str = "thresholds.json";

pub fn calibrate(manifest: &Path, model: &Path, out_dir: &Path, cfg: &RunConfig) -> CliResult<()> {
    let m = DatasetManifest::load(manifest)?;
    let model = load_model(model)?;
    let scored = score_slides(&m, &model, &cfg.score_config(), |s| {
        s.split == Split::Train && s.diagnosis.as_bool().is_some()
    })?;

    let (mut scores, mut labels) = (Vec::new(), Vec::new());
    for s in &scored {
        for (v, l) in s.ae.iter().zip(&s.labels) {
            if let Some(l) = l {
                scores.push(*v);
                labels.push(*l);
            }
        }
    }
    let patch_roc = roc_curve(&scores, &labels)?;
    let t_patch = patch_roc.optimal_cutpoint();

    let pct = scored
        .iter()
        .map(|s| positive_percentage(&s.ae, t_patch))
        .collect::<stainscope::Result<Vec<_>>>()?;
    let diag: Vec<bool> = scored.iter().map(|s| s.positive.expect("filtered")).collect();
    let slide_roc = roc_curve(&pct, &diag)?;
    let out = ThresholdsFile {
        t_patch,
        t_slide: slide_roc.optimal_cutpoint(),
        patch_auc: patch_roc.auc,
        slide_auc: slide_roc.auc,
    };
    ensure_dir(out_dir)?;
    write_json(&out_dir.join(THRESHOLDS_FILE), &out)?;
    println!("{}", serde_json::to_string_pretty(&out).expect("thresholds serialize"));
    Ok(())
}

#[derive(Serialize)]
struct Indeterminate<'a> {
    slide_id: &'a str,
    diagnosis: &'static str,
    reason: String,
}

pub fn run(slide: &Path, model: &Path, thresholds: &Path, out_dir: Option<&Path>, cfg: &RunConfig) -> CliResult<()> {
    let model = load_model(model)?;
    let t = ThresholdsFile::load(thresholds)?;
    let img = load_rgb(slide)?;
    let id = slide.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let th = Thresholds {
        t_patch: t.t_patch,
        t_slide: t.t_slide,
    };
    let (json, result) = match score_slide(&img, &model, &cfg.score_config(), th, &id) {
        Ok(s) => {
            let diagnosis = if s.diagnosis == Diagnosis::Positive { "positive" } else { "negative" };
            println!("{}: {diagnosis} ({:.2}% of {} patches positive)", s.slide_id, s.positive_fraction, s.patch_scores.len());
            (serde_json::to_string_pretty(&s), Ok(()))
        }
        Err(Error::EmptySlide(reason)) => {
            let body = Indeterminate {
                slide_id: &id,
                diagnosis: "indeterminate",
                reason: reason.clone(),
            };
            (serde_json::to_string_pretty(&body), Err(CliError::Indeterminate(reason)))
        }
        Err(e) => return Err(e.into()),
    };
    let json = json.expect("score serializes");
    println!("{json}");
    if let Some(dir) = out_dir {
        ensure_dir(dir)?;
        let p = dir.join(format!("{id}.json"));
        std::fs::write(&p, json + "\n").map_err(|e| CliError::write(&p, e))?;
    }
    result
}
