use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Binary confusion counts; rows are the actual class.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub fp: u64,
    pub tn: u64,
}

impl ConfusionMatrix {
    pub fn from_predictions(preds: &[bool], labels: &[bool]) -> Result<Self> {
        if preds.len() != labels.len() {
            return Err(Error::InvalidInput(format!(
                "{} predictions but {} labels",
                preds.len(),
                labels.len()
            )));
        }
        let mut m = ConfusionMatrix::default();
        for (&p, &l) in preds.iter().zip(labels) {
            match (l, p) {
                (true, true) => m.tp += 1,
                (true, false) => m.fn_ += 1,
                (false, true) => m.fp += 1,
                (false, false) => m.tn += 1,
            }
        }
        Ok(m)
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fn_ + self.fp + self.tn
    }

    pub fn add(&mut self, other: &ConfusionMatrix) {
        self.tp += other.tp;
        self.fn_ += other.fn_;
        self.fp += other.fp;
        self.tn += other.tn;
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub confusion: ConfusionMatrix,
    pub positive: ClassMetrics,
    pub negative: ClassMetrics,
    pub accuracy: f64,
    /// Set when some ratio had a zero denominator and was reported as 0.
    pub degenerate: bool,
}

impl Metrics {
    pub fn sensitivity(&self) -> f64 {
        self.positive.recall
    }

    pub fn specificity(&self) -> f64 {
        self.negative.recall
    }
}

fn ratio(num: u64, den: u64, degenerate: &mut bool) -> f64 {
    if den == 0 {
        *degenerate = true;
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn class_metrics(hit: u64, predicted: u64, actual: u64, degenerate: &mut bool) -> ClassMetrics {
    let precision = ratio(hit, predicted, degenerate);
    let recall = ratio(hit, actual, degenerate);
    let f1 = if precision + recall == 0.0 {
        *degenerate = true;
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    ClassMetrics { precision, recall, f1 }
}

pub fn metrics_from_confusion(m: ConfusionMatrix) -> Metrics {
    let mut degenerate = false;
    let positive = class_metrics(m.tp, m.tp + m.fp, m.tp + m.fn_, &mut degenerate);
    let negative = class_metrics(m.tn, m.tn + m.fn_, m.tn + m.fp, &mut degenerate);
    let accuracy = ratio(m.tp + m.tn, m.total(), &mut degenerate);
    Metrics {
        confusion: m,
        positive,
        negative,
        accuracy,
        degenerate,
    }
}

pub fn confusion_and_metrics(preds: &[bool], labels: &[bool]) -> Result<Metrics> {
    Ok(metrics_from_confusion(ConfusionMatrix::from_predictions(preds, labels)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reported_matrix() {
        let m = metrics_from_confusion(ConfusionMatrix { tp: 110, fn_: 18, fp: 5, tn: 112 });
        assert!((m.sensitivity() - 0.859).abs() < 1e-3);
        assert!((m.specificity() - 0.957).abs() < 1e-3);
        assert!((m.accuracy - 0.906).abs() < 1e-3);
        assert!(!m.degenerate);
    }

    #[test]
    fn all_correct() {
        let labels = [true, false, true, false, false];
        let m = confusion_and_metrics(&labels, &labels).unwrap();
        for c in [m.positive, m.negative] {
            assert_eq!((c.precision, c.recall, c.f1), (1.0, 1.0, 1.0));
        }
        assert_eq!(m.accuracy, 1.0);
    }

    #[test]
    fn no_predicted_positives() {
        let m = confusion_and_metrics(&[false, false, false], &[true, false, true]).unwrap();
        assert_eq!(m.positive.precision, 0.0);
        assert!(m.degenerate);
    }

    #[test]
    fn length_mismatch() {
        assert!(matches!(confusion_and_metrics(&[true], &[true, false]), Err(Error::InvalidInput(_))));
    }

    proptest! {
        #[test]
        fn recall_f1_identities(tp in 1u64..500, fn_ in 0u64..500, fp in 0u64..500, tn in 1u64..500) {
            let m = metrics_from_confusion(ConfusionMatrix { tp, fn_, fp, tn });
            let sens = tp as f64 / (tp + fn_) as f64;
            let spec = tn as f64 / (tn + fp) as f64;
            prop_assert!((m.positive.recall - sens).abs() < 1e-15);
            prop_assert!((m.negative.recall - spec).abs() < 1e-15);
            let ppv = tp as f64 / (tp + fp) as f64;
            let hm = 1.0 / ((1.0 / ppv + 1.0 / sens) / 2.0);
            prop_assert!((m.positive.f1 - hm).abs() < 1e-12);
            let npv = tn as f64 / (tn + fn_) as f64;
            let hm = 1.0 / ((1.0 / npv + 1.0 / spec) / 2.0);
            prop_assert!((m.negative.f1 - hm).abs() < 1e-12);
        }
    }
}
