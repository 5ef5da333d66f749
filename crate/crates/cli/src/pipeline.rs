//! Loading manifest slides and scoring their patches with both detectors.

use std::path::Path;

use rayon::prelude::*;
use stainscope::ae::AeModel;
use stainscope::detect::{baseline_red_fraction, border_patches, score_patches, ScoreConfig};
use stainscope::imaging::io::load_rgb;
use stainscope::imaging::Patch;
use stainscope::manifest::{DatasetManifest, SlideEntry};
use stainscope::stats::SlideRecord;
use stainscope::Result;

/// The patch set of a slide: its manifest patches when listed, otherwise
/// border windows extracted on the fly (unlabeled).
pub fn slide_patches(m: &DatasetManifest, slide: &SlideEntry, cfg: &ScoreConfig) -> Result<(Vec<Patch>, Vec<Option<bool>>)> {
    if slide.patches.is_empty() {
        let img = load_rgb(&m.resolve(&slide.image_path))?;
        let patches = border_patches(&img, cfg, &slide.slide_id)?;
        let n = patches.len();
        return Ok((patches, vec![None; n]));
    }
    let patches = slide
        .patches
        .par_iter()
        .map(|e| Patch::new(load_rgb(&m.resolve(&e.patch_path))?, e.origin, slide.slide_id.as_str()))
        .collect::<Result<Vec<_>>>()?;
    Ok((patches, slide.patches.iter().map(|e| e.label.as_bool()).collect()))
}

#[derive(Clone, Debug)]
pub struct ScoredSlide {
    pub slide_id: String,
    pub patient_id: String,
    pub positive: Option<bool>,
    pub origins: Vec<(usize, usize)>,
    pub labels: Vec<Option<bool>>,
    pub ae: Vec<f64>,
    pub baseline: Vec<f64>,
}

impl ScoredSlide {
    pub fn record(&self, baseline: bool) -> Option<SlideRecord> {
        Some(SlideRecord {
            slide_id: self.slide_id.clone(),
            patient_id: self.patient_id.clone(),
            positive: self.positive?,
            patch_scores: if baseline { self.baseline.clone() } else { self.ae.clone() },
            patch_labels: self.labels.clone(),
        })
    }
}

pub fn score_slide_entry(m: &DatasetManifest, slide: &SlideEntry, model: &AeModel<f32>, cfg: &ScoreConfig) -> Result<ScoredSlide> {
    let (patches, labels) = slide_patches(m, slide, cfg)?;
    let origins = patches.iter().map(|p| p.origin).collect();
    let ae = score_patches(model, &patches, cfg)?.into_iter().map(|s| s.f_brown).collect();
    let baseline = patches
        .par_iter()
        .map(|p| baseline_red_fraction(&p.image, &cfg.band))
        .collect::<Result<Vec<_>>>()?;
    log::info!("scored {} ({} patches)", slide.slide_id, patches.len());
    Ok(ScoredSlide {
        slide_id: slide.slide_id.clone(),
        patient_id: slide.patient().to_owned(),
        positive: slide.diagnosis.as_bool(),
        origins,
        labels,
        ae,
        baseline,
    })
}

/// Scores every slide accepted by `keep`, in manifest order.
pub fn score_slides(
    m: &DatasetManifest,
    model: &AeModel<f32>,
    cfg: &ScoreConfig,
    keep: impl Fn(&SlideEntry) -> bool,
) -> Result<Vec<ScoredSlide>> {
    m.slides.iter().filter(|s| keep(s)).map(|s| score_slide_entry(m, s, model, cfg)).collect()
}

pub fn ensure_dir(dir: &Path) -> crate::error::CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| crate::error::CliError::write(dir, e))
}
