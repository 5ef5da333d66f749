//! Cross-validation report files.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use stainscope::stats::{ClassMetrics, ConfusionMatrix, FoldSummary};

use crate::error::{CliError, CliResult};
use crate::pipeline::ScoredSlide;

pub const METRICS_CSV: &str = "metrics.csv";
pub const FOLDS_CSV: &str = "folds.csv";
pub const CONFUSION_JSON: &str = "confusion.json";
pub const ROC_CSV: &str = "roc_points.csv";
pub const SUMMARY_JSON: &str = "summary.json";
pub const ROC_SVG: &str = "roc.svg";
pub const PATCH_SCORES_CSV: &str = "patch_scores.csv";

pub const CLASSES: [&str; 2] = ["positive", "negative"];
pub const CLASS_METRICS: [&str; 3] = ["precision", "recall", "f1"];

fn class_values(c: &ClassMetrics) -> [f64; 3] {
    [c.precision, c.recall, c.f1]
}

pub fn write_json(path: &Path, value: &impl Serialize) -> CliResult<()> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::write(path, e))?;
    s.push('\n');
    std::fs::write(path, s).map_err(|e| CliError::write(path, e))
}

/// One row per detector, fold, class and metric.
pub fn write_metrics_csv(path: &Path, runs: &[(&str, &FoldSummary)]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::write(path, e))?;
    let err = |e: csv::Error| CliError::write(path, e);
    w.write_record(["detector", "fold", "class", "metric", "value"]).map_err(err)?;
    for (name, s) in runs {
        for f in &s.folds {
            for (class, cm) in CLASSES.iter().zip([&f.metrics.positive, &f.metrics.negative]) {
                for (metric, v) in CLASS_METRICS.iter().zip(class_values(cm)) {
                    w.write_record([*name, f.fold.to_string().as_str(), class, metric, v.to_string().as_str()]).map_err(err)?;
                }
            }
        }
    }
    w.flush().map_err(|e| CliError::write(path, e))
}

pub fn write_folds_csv(path: &Path, runs: &[(&str, &FoldSummary)]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::write(path, e))?;
    let err = |e: csv::Error| CliError::write(path, e);
    w.write_record(["detector", "fold", "t_patch", "t_slide", "patch_auc", "slide_auc", "accuracy", "test_slides"])
        .map_err(err)?;
    for (name, s) in runs {
        for f in &s.folds {
            w.write_record([
                name.to_string(),
                f.fold.to_string(),
                f.t_patch.to_string(),
                f.t_slide.to_string(),
                f.patch_auc.to_string(),
                f.slide_auc.to_string(),
                f.metrics.accuracy.to_string(),
                f.test_slides.len().to_string(),
            ])
            .map_err(err)?;
        }
    }
    w.flush().map_err(|e| CliError::write(path, e))
}

#[derive(Serialize)]
struct ConfusionReport<'a> {
    detector: &'a str,
    pooled: ConfusionMatrix,
    folds: Vec<ConfusionMatrix>,
}

pub fn write_confusion(path: &Path, runs: &[(&str, &FoldSummary)]) -> CliResult<()> {
    let body: Vec<ConfusionReport> = runs
        .iter()
        .map(|(name, s)| ConfusionReport {
            detector: name,
            pooled: s.pooled.confusion,
            folds: s.folds.iter().map(|f| f.metrics.confusion).collect(),
        })
        .collect();
    write_json(path, &body)
}

/// Per-fold test ROC points, then the vertically averaged curve as fold `mean`.
pub fn write_roc_points(path: &Path, runs: &[(&str, &FoldSummary)]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::write(path, e))?;
    let err = |e: csv::Error| CliError::write(path, e);
    w.write_record(["detector", "fold", "threshold", "fpr", "tpr"]).map_err(err)?;
    for (name, s) in runs {
        let curves = s.folds.iter().map(|f| (f.fold.to_string(), &f.roc));
        for (fold, roc) in curves.chain(std::iter::once(("mean".to_string(), &s.mean_roc))) {
            for p in &roc.points {
                w.write_record([name.to_string(), fold.clone(), p.threshold.to_string(), p.fpr.to_string(), p.tpr.to_string()])
                    .map_err(err)?;
            }
        }
    }
    w.flush().map_err(|e| CliError::write(path, e))
}

/// Every scored patch under both detectors. `label` is empty when unknown.
pub fn write_patch_scores(path: &Path, slides: &[ScoredSlide]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::write(path, e))?;
    let err = |e: csv::Error| CliError::write(path, e);
    w.write_record(["detector", "slide_id", "x", "y", "label", "score"]).map_err(err)?;
    for (name, baseline) in [("autoencoder", false), ("baseline", true)] {
        for s in slides {
            let scores = if baseline { &s.baseline } else { &s.ae };
            for ((origin, label), v) in s.origins.iter().zip(&s.labels).zip(scores) {
                let label = label.map(|l| if l { "1" } else { "0" }).unwrap_or("");
                w.write_record([name, s.slide_id.as_str(), &origin.0.to_string(), &origin.1.to_string(), label, &v.to_string()])
                    .map_err(err)?;
            }
        }
    }
    w.flush().map_err(|e| CliError::write(path, e))
}

const SVG_COLORS: [&str; 2] = ["#1f4e9c", "#c0392b"];

/// Averaged ROC curves with each detector's pooled operating point.
pub fn roc_svg(runs: &[(&str, &FoldSummary)]) -> String {
    let (size, pad) = (400.0, 50.0);
    let sx = |x: f64| pad + x * size;
    let sy = |y: f64| pad + (1.0 - y) * size;
    let mut s = String::new();
    let total = size + 2.0 * pad;
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{total}" height="{total}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect x="{pad}" y="{pad}" width="{size}" height="{size}" fill="none" stroke="black"/>"#);
    let _ = writeln!(
        s,
        r##"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="#999" stroke-dasharray="4 4"/>"##,
        sx(0.0),
        sy(0.0),
        sx(1.0),
        sy(1.0)
    );
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">False positive rate</text>"#, pad + size / 2.0, total - 15.0);
    let _ = writeln!(
        s,
        r#"<text x="15" y="{}" text-anchor="middle" transform="rotate(-90 15 {})">True positive rate</text>"#,
        pad + size / 2.0,
        pad + size / 2.0
    );
    for (i, (name, summary)) in runs.iter().enumerate() {
        let color = SVG_COLORS[i % SVG_COLORS.len()];
        let pts: Vec<String> = summary
            .mean_roc
            .points
            .iter()
            .map(|p| format!("{:.2},{:.2}", sx(p.fpr), sy(p.tpr)))
            .collect();
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#, pts.join(" "));
        let (fpr, tpr) = operating_point(&summary.pooled.confusion);
        let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="5" fill="{color}"/>"#, sx(fpr), sy(tpr));
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" fill="{color}">{name}: mean AUC {:.3}</text>"#,
            sx(0.45),
            sy(0.1 + 0.06 * i as f64),
            summary.auc.mean
        );
    }
    s.push_str("</svg>\n");
    s
}

pub fn operating_point(c: &ConfusionMatrix) -> (f64, f64) {
    let ratio = |a: u64, b: u64| if a + b == 0 { 0.0 } else { a as f64 / (a + b) as f64 };
    (ratio(c.fp, c.tn), ratio(c.tp, c.fn_))
}

#[derive(Serialize)]
pub struct DetectorSummary<'a> {
    pub detector: &'a str,
    #[serde(flatten)]
    pub summary: SummaryView<'a>,
}

#[derive(Serialize)]
pub struct SummaryView<'a> {
    pub k: usize,
    pub accuracy: &'a stainscope::stats::MeanStd,
    pub auc: &'a stainscope::stats::MeanStd,
    pub positive: &'a stainscope::stats::ClassSummary,
    pub negative: &'a stainscope::stats::ClassSummary,
    pub pooled: &'a stainscope::stats::Metrics,
    pub mean_roc_auc: f64,
}

pub fn summary_view(s: &FoldSummary) -> SummaryView<'_> {
    SummaryView {
        k: s.k,
        accuracy: &s.accuracy,
        auc: &s.auc,
        positive: &s.positive,
        negative: &s.negative,
        pooled: &s.pooled,
        mean_roc_auc: s.mean_roc.auc,
    }
}
