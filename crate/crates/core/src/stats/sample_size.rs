use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SampleSize {
    pub positives: u64,
    pub negatives: u64,
    pub total: u64,
    /// Unrounded positive count.
    pub positives_exact: f64,
}

/// Hanley-McNeil variance of an AUC estimate per unit positive, with
/// `r` negatives per positive.
pub fn hanley_mcneil_unit_variance(auc: f64, r: f64) -> f64 {
    let q1 = auc / (2.0 - auc);
    let q2 = 2.0 * auc * auc / (1.0 + auc);
    (q1 - auc * auc) / r + (q2 - auc * auc)
}

/// Subjects needed for a one-sided test of `H0: AUC = auc_null` against
/// `auc_alt`, for a positive:negative mix of `pos_neg_ratio`.
pub fn roc_sample_size(auc_null: f64, auc_alt: f64, power: f64, alpha: f64, pos_neg_ratio: f64) -> Result<SampleSize> {
    if !(0.5..1.0).contains(&auc_null) || !(auc_alt < 1.0) {
        return Err(Error::InvalidInput("AUCs must lie in [0.5, 1)".into()));
    }
    if auc_alt <= auc_null {
        return Err(Error::InvalidInput(format!(
            "alternative AUC {auc_alt} must exceed null AUC {auc_null}"
        )));
    }
    if !(power > 0.0 && power < 1.0 && alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidInput("power and alpha must lie in (0, 1)".into()));
    }
    if !(pos_neg_ratio > 0.0 && pos_neg_ratio.is_finite()) {
        return Err(Error::InvalidInput("ratio must be positive".into()));
    }
    let r = 1.0 / pos_neg_ratio;
    let z = Normal::standard();
    let z_alpha = z.inverse_cdf(1.0 - alpha);
    let z_beta = z.inverse_cdf(power);
    let num = z_alpha * hanley_mcneil_unit_variance(auc_null, r).sqrt()
        + z_beta * hanley_mcneil_unit_variance(auc_alt, r).sqrt();
    let delta = auc_alt - auc_null;
    let exact = (num.max(0.0) / delta).powi(2);
    let positives = (exact.ceil() as u64).max(1);
    let negatives = ((exact * r).ceil() as u64).max(1);
    Ok(SampleSize {
        positives,
        negatives,
        total: positives + negatives,
        positives_exact: exact,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn monotone_in_power_and_effect() {
        let mut last = u64::MAX;
        for i in (1..99).rev() {
            let n = roc_sample_size(0.8, 0.9, i as f64 / 100.0, 0.05, 1.0).unwrap().total;
            assert!(n <= last);
            last = n;
        }
        let small = roc_sample_size(0.8, 0.85, 0.8, 0.05, 1.0).unwrap().total;
        let big = roc_sample_size(0.8, 0.9, 0.8, 0.05, 1.0).unwrap().total;
        assert!(big < small);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(roc_sample_size(0.9, 0.85, 0.8, 0.05, 1.0).is_err());
        assert!(roc_sample_size(0.9, 0.9, 0.8, 0.05, 1.0).is_err());
        assert!(roc_sample_size(0.8, 0.9, 1.0, 0.05, 1.0).is_err());
    }

    #[test]
    fn variance_formula_by_hand() {
        // A = 0.75: Q1 = 0.6, Q2 = 0.642857…, A² = 0.5625.
        let v = hanley_mcneil_unit_variance(0.75, 2.0);
        assert!((v - ((0.6 - 0.5625) / 2.0 + (9.0 / 14.0 - 0.5625))).abs() < 1e-15);
    }
}
