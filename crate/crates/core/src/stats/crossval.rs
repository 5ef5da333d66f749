use std::collections::BTreeMap;

use serde::Serialize;

use super::kfold::stratified_kfold;
use super::metrics::{confusion_and_metrics, metrics_from_confusion, ConfusionMatrix, Metrics};
use super::roc::{average_roc, roc_curve, RocCurve};
use crate::error::{Error, Result};

/// Per-slide detector output consumed by [`crossval`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SlideRecord {
    pub slide_id: String,
    pub patient_id: String,
    pub positive: bool,
    pub patch_scores: Vec<f64>,
    /// Annotation per patch, aligned with `patch_scores`.
    pub patch_labels: Vec<Option<bool>>,
}

/// Percentage of scores at or above `threshold`.
pub fn positive_percentage(scores: &[f64], threshold: f64) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::EmptySlide("no patches to aggregate".into()));
    }
    let hits = scores.iter().filter(|&&s| s >= threshold).count();
    Ok(100.0 * hits as f64 / scores.len() as f64)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Population standard deviation across folds.
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return MeanStd::default();
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        MeanStd { mean, std: var.sqrt() }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct ClassSummary {
    pub precision: MeanStd,
    pub recall: MeanStd,
    pub f1: MeanStd,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FoldResult {
    pub fold: usize,
    pub test_slides: Vec<String>,
    pub t_patch: f64,
    pub t_slide: f64,
    /// Patch-level AUC on the training annotations.
    pub patch_auc: f64,
    /// Slide-level AUC on the held-out slides.
    pub slide_auc: f64,
    pub metrics: Metrics,
    pub roc: RocCurve,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FoldSummary {
    pub k: usize,
    pub folds: Vec<FoldResult>,
    pub positive: ClassSummary,
    pub negative: ClassSummary,
    pub accuracy: MeanStd,
    pub auc: MeanStd,
    /// Held-out predictions of all folds in one matrix.
    pub pooled: Metrics,
    pub mean_roc: RocCurve,
}

fn calibrate_patch(train: &[&SlideRecord]) -> Result<(f64, f64)> {
    let (mut scores, mut labels) = (Vec::new(), Vec::new());
    for s in train {
        for (&sc, l) in s.patch_scores.iter().zip(&s.patch_labels) {
            if let Some(l) = l {
                scores.push(sc);
                labels.push(*l);
            }
        }
    }
    let roc = roc_curve(&scores, &labels)?;
    Ok((roc.optimal_cutpoint(), roc.auc))
}

/// Patient-stratified k-fold evaluation. Each fold learns the patch and
/// slide thresholds from its training patients only.
pub fn crossval(slides: &[SlideRecord], k: usize, seed: u64) -> Result<FoldSummary> {
    for s in slides {
        if s.patch_scores.len() != s.patch_labels.len() {
            return Err(Error::InvalidInput(format!(
                "slide {}: {} scores but {} labels",
                s.slide_id,
                s.patch_scores.len(),
                s.patch_labels.len()
            )));
        }
        if s.patch_scores.is_empty() {
            return Err(Error::EmptySlide(s.slide_id.clone()));
        }
    }
    // A patient is positive if any of their slides is.
    let mut patients: BTreeMap<&str, bool> = BTreeMap::new();
    for s in slides {
        *patients.entry(&s.patient_id).or_default() |= s.positive;
    }
    let ids: Vec<String> = patients.keys().map(|s| s.to_string()).collect();
    let labels: Vec<bool> = patients.values().copied().collect();
    let folds = stratified_kfold(&ids, &labels, k, seed)?;

    let mut results = Vec::with_capacity(k);
    let mut pooled = ConfusionMatrix::default();
    for (f, members) in folds.iter().enumerate() {
        let held: Vec<&str> = members.iter().map(|&i| ids[i].as_str()).collect();
        let (test, train): (Vec<&SlideRecord>, Vec<&SlideRecord>) =
            slides.iter().partition(|s| held.contains(&s.patient_id.as_str()));
        let (t_patch, patch_auc) = calibrate_patch(&train)?;

        let pct = |s: &&SlideRecord| positive_percentage(&s.patch_scores, t_patch);
        let train_pct = train.iter().map(pct).collect::<Result<Vec<_>>>()?;
        let train_lab: Vec<bool> = train.iter().map(|s| s.positive).collect();
        let t_slide = roc_curve(&train_pct, &train_lab)?.optimal_cutpoint();

        let test_pct = test.iter().map(pct).collect::<Result<Vec<_>>>()?;
        let test_lab: Vec<bool> = test.iter().map(|s| s.positive).collect();
        let roc = roc_curve(&test_pct, &test_lab).map_err(|e| match e {
            Error::DegenerateLabels => Error::DegenerateFold { fold: f },
            e => e,
        })?;
        let preds: Vec<bool> = test_pct.iter().map(|&p| p >= t_slide).collect();
        let metrics = confusion_and_metrics(&preds, &test_lab)?;
        pooled.add(&metrics.confusion);
        log::debug!(
            "fold {f}: t_patch {t_patch:.4} t_slide {t_slide:.3} accuracy {:.3} auc {:.3}",
            metrics.accuracy,
            roc.auc
        );
        results.push(FoldResult {
            fold: f,
            test_slides: test.iter().map(|s| s.slide_id.clone()).collect(),
            t_patch,
            t_slide,
            patch_auc,
            slide_auc: roc.auc,
            metrics,
            roc,
        });
    }

    let col = |g: &dyn Fn(&FoldResult) -> f64| MeanStd::of(&results.iter().map(g).collect::<Vec<_>>());
    let positive = ClassSummary {
        precision: col(&|r| r.metrics.positive.precision),
        recall: col(&|r| r.metrics.positive.recall),
        f1: col(&|r| r.metrics.positive.f1),
    };
    let negative = ClassSummary {
        precision: col(&|r| r.metrics.negative.precision),
        recall: col(&|r| r.metrics.negative.recall),
        f1: col(&|r| r.metrics.negative.f1),
    };
    let accuracy = col(&|r| r.metrics.accuracy);
    let auc = col(&|r| r.slide_auc);
    let curves: Vec<RocCurve> = results.iter().map(|r| r.roc.clone()).collect();
    Ok(FoldSummary {
        k,
        positive,
        negative,
        accuracy,
        auc,
        pooled: metrics_from_confusion(pooled),
        mean_roc: average_roc(&curves)?,
        folds: results,
    })
}
