//! ROC analysis, classification metrics, cross-validation and the AUC
//! sample-size estimate.

mod crossval;
mod kfold;
mod metrics;
mod roc;
mod sample_size;

pub use crossval::{crossval, positive_percentage, ClassSummary, FoldResult, FoldSummary, MeanStd, SlideRecord};
pub use kfold::stratified_kfold;
pub use metrics::{confusion_and_metrics, metrics_from_confusion, ClassMetrics, ConfusionMatrix, Metrics};
pub use roc::{average_roc, roc_curve, RocCurve, RocPoint, AVERAGING_GRID};
pub use sample_size::{hanley_mcneil_unit_variance, roc_sample_size, SampleSize};
