use std::path::Path;

use stainscope::ae::load_model;
use stainscope::manifest::DatasetManifest;
use stainscope::stats::{crossval, FoldSummary, SlideRecord};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::pipeline::{ensure_dir, score_slides};
use crate::report::{self, DetectorSummary};

pub const DETECTORS: [&str; 2] = ["autoencoder", "baseline"];

pub fn run(manifest: &Path, model: &Path, out_dir: &Path, svg: bool, cfg: &RunConfig) -> CliResult<()> {
    let m = DatasetManifest::load(manifest)?;
    let model = load_model(model)?;
    let scored = score_slides(&m, &model, &cfg.score_config(), |s| s.diagnosis.as_bool().is_some())?;
    let records = |baseline: bool| -> Vec<SlideRecord> { scored.iter().filter_map(|s| s.record(baseline)).collect() };
    let ae = crossval(&records(false), cfg.k, cfg.seed)?;
    let base = crossval(&records(true), cfg.k, cfg.seed)?;
    let runs: [(&str, &FoldSummary); 2] = [(DETECTORS[0], &ae), (DETECTORS[1], &base)];

    ensure_dir(out_dir)?;
    report::write_metrics_csv(&out_dir.join(report::METRICS_CSV), &runs)?;
    report::write_folds_csv(&out_dir.join(report::FOLDS_CSV), &runs)?;
    report::write_confusion(&out_dir.join(report::CONFUSION_JSON), &runs)?;
    report::write_roc_points(&out_dir.join(report::ROC_CSV), &runs)?;
    report::write_patch_scores(&out_dir.join(report::PATCH_SCORES_CSV), &scored)?;
    let summary: Vec<DetectorSummary> = runs
        .iter()
        .map(|(d, s)| DetectorSummary {
            detector: d,
            summary: report::summary_view(s),
        })
        .collect();
    report::write_json(&out_dir.join(report::SUMMARY_JSON), &summary)?;
    if svg {
        let p = out_dir.join(report::ROC_SVG);
        std::fs::write(&p, report::roc_svg(&runs)).map_err(|e| CliError::write(&p, e))?;
    }
    for (name, s) in runs {
        println!(
            "{name:<12} accuracy {:.3} ± {:.3}  AUC {:.3} ± {:.3}  sensitivity {:.3}  specificity {:.3}",
            s.accuracy.mean,
            s.accuracy.std,
            s.auc.mean,
            s.auc.std,
            s.pooled.sensitivity(),
            s.pooled.specificity()
        );
    }
    Ok(())
}
