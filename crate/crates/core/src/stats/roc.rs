use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    /// Scores `>= threshold` are called positive. `+inf` marks the origin;
    /// averaged curves carry NaN.
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

/// Empirical ROC curve, ordered by threshold descending from `(0, 0)` to `(1, 1)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

pub const AVERAGING_GRID: usize = 101;

fn check_scores(scores: &[f64], labels: &[bool]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(Error::InvalidInput(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidInput("NaN score".into()));
    }
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::DegenerateLabels);
    }
    Ok((pos, neg))
}

/// One point per distinct score. The area is accumulated in integer
/// counts, so it equals the tie-corrected Mann-Whitney statistic exactly.
pub fn roc_curve(scores: &[f64], labels: &[bool]) -> Result<RocCurve> {
    let (pos, neg) = check_scores(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = vec![RocPoint {
        threshold: f64::INFINITY,
        fpr: 0.0,
        tpr: 0.0,
    }];
    let (mut tp, mut fp) = (0u64, 0u64);
    // Twice the area in units of one positive-negative pair.
    let mut area2 = 0u64;
    let mut i = 0;
    while i < order.len() {
        let t = scores[order[i]];
        let (tp0, fp0) = (tp, fp);
        while i < order.len() && scores[order[i]] == t {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        area2 += (fp - fp0) * (tp + tp0);
        points.push(RocPoint {
            threshold: t,
            fpr: fp as f64 / neg as f64,
            tpr: tp as f64 / pos as f64,
        });
    }
    Ok(RocCurve {
        points,
        auc: area2 as f64 / (2 * pos * neg) as f64,
    })
}

fn trapezoid(points: &[RocPoint]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0)
        .sum()
}

impl RocCurve {
    /// Curve from explicit points; the area is recomputed by trapezoid.
    pub fn from_points(points: Vec<RocPoint>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidInput("empty ROC curve".into()));
        }
        let monotone = points
            .windows(2)
            .all(|w| w[1].fpr >= w[0].fpr && w[1].tpr >= w[0].tpr);
        if !monotone {
            return Err(Error::InvalidInput("ROC points must be non-decreasing".into()));
        }
        let auc = trapezoid(&points);
        Ok(RocCurve { points, auc })
    }

    /// Index of the point nearest `(0, 1)`; ties go to higher tpr, then
    /// to lower threshold.
    pub fn optimal_point(&self) -> usize {
        let dist = |p: &RocPoint| (p.fpr * p.fpr + (1.0 - p.tpr) * (1.0 - p.tpr)).sqrt();
        let mut best = 0;
        for (i, p) in self.points.iter().enumerate().skip(1) {
            let b = &self.points[best];
            let (d, db) = (dist(p), dist(b));
            let better = d < db
                || (d == db && (p.tpr > b.tpr || (p.tpr == b.tpr && p.threshold < b.threshold)));
            if better {
                best = i;
            }
        }
        best
    }

    /// Decision threshold for the optimal point, placed halfway to the next
    /// lower score so that it separates the two observed values.
    pub fn optimal_cutpoint(&self) -> f64 {
        let i = self.optimal_point();
        let t = self.points[i].threshold;
        let next = self.points.get(i + 1).map(|p| p.threshold);
        match next {
            Some(n) if t.is_finite() && n.is_finite() => t + (n - t) / 2.0,
            _ if t.is_finite() => t,
            // The origin was chosen: sit just above the highest score.
            Some(n) if n.is_finite() => n + n.abs().max(1.0) * 1e-9,
            _ => t,
        }
    }

    /// Tpr at `fpr`, taking the top of vertical segments and interpolating
    /// linearly between points.
    pub fn tpr_at(&self, fpr: f64) -> f64 {
        let pts = &self.points;
        let i = match pts.iter().rposition(|p| p.fpr <= fpr) {
            Some(i) => i,
            None => return pts[0].tpr,
        };
        if i + 1 == pts.len() || pts[i].fpr == fpr {
            return pts[i].tpr;
        }
        let (a, b) = (&pts[i], &pts[i + 1]);
        a.tpr + (b.tpr - a.tpr) * (fpr - a.fpr) / (b.fpr - a.fpr)
    }
}

/// Vertical averaging: mean tpr over a grid of 101 fpr values.
pub fn average_roc(curves: &[RocCurve]) -> Result<RocCurve> {
    if curves.is_empty() {
        return Err(Error::InvalidInput("no curves to average".into()));
    }
    let mut points = Vec::with_capacity(AVERAGING_GRID + 1);
    for g in 0..AVERAGING_GRID {
        let fpr = g as f64 / (AVERAGING_GRID - 1) as f64;
        let tpr = curves.iter().map(|c| c.tpr_at(fpr)).sum::<f64>() / curves.len() as f64;
        points.push(RocPoint {
            threshold: f64::NAN,
            fpr,
            tpr,
        });
    }
    if points[0].tpr > 0.0 {
        points.insert(
            0,
            RocPoint {
                threshold: f64::NAN,
                fpr: 0.0,
                tpr: 0.0,
            },
        );
    }
    RocCurve::from_points(points)
}
