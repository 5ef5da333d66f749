use serde::{Deserialize, Serialize};

use super::image::{BinaryMask, Image};
use super::morphology::{opening, remove_small_components};
use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TissueParams {
    /// Connected components smaller than this are discarded.
    pub min_area: usize,
    /// Radius of the square opening element (1 → 3×3).
    pub opening_radius: usize,
}

impl Default for TissueParams {
    fn default() -> Self {
        TissueParams {
            min_area: 64,
            opening_radius: 1,
        }
    }
}

#[derive(Clone, Debug)]
pub struct TissueMask {
    pub mask: BinaryMask,
    /// `None` when the gray histogram has a single level and Otsu is undefined.
    pub threshold: Option<u8>,
}

impl TissueMask {
    pub fn is_degenerate(&self) -> bool {
        self.threshold.is_none()
    }
}

/// Otsu's threshold over a 256-bin histogram; `t` splits `[0, t]` from
/// `[t+1, 255]`. Returns `None` for single-level histograms.
pub fn otsu_threshold(hist: &[u64; 256]) -> Option<u8> {
    let total: u64 = hist.iter().sum();
    if hist.iter().filter(|&&c| c > 0).count() < 2 {
        return None;
    }
    let sum_all: f64 = hist.iter().enumerate().map(|(i, &c)| i as f64 * c as f64).sum();
    let mut w0 = 0u64;
    let mut sum0 = 0.0;
    let mut best = (f64::NEG_INFINITY, 0u8);
    for t in 0..255usize {
        w0 += hist[t];
        sum0 += t as f64 * hist[t] as f64;
        let w1 = total - w0;
        if w0 == 0 || w1 == 0 {
            continue;
        }
        let m0 = sum0 / w0 as f64;
        let m1 = (sum_all - sum0) / w1 as f64;
        let between = w0 as f64 * w1 as f64 * (m0 - m1) * (m0 - m1);
        if between > best.0 {
            best = (between, t as u8);
        }
    }
    Some(best.1)
}

/// Tissue is the darker Otsu class of the grayscale image, cleaned by an
/// opening and by dropping components below `min_area`.
pub fn tissue_mask(img: &Image, params: &TissueParams) -> Result<TissueMask> {
    let gray = img.to_gray()?;
    let mut hist = [0u64; 256];
    for &g in gray.data() {
        hist[g as usize] += 1;
    }
    let Some(t) = otsu_threshold(&hist) else {
        log::warn!("uniform image: Otsu threshold undefined, tissue mask is empty");
        return Ok(TissueMask {
            mask: BinaryMask::new(img.width(), img.height()),
            threshold: None,
        });
    };
    let bits = gray.data().iter().map(|&g| g <= t).collect();
    let raw = BinaryMask::from_bits(img.width(), img.height(), bits)?;
    let opened = opening(&raw, params.opening_radius);
    let mask = remove_small_components(&opened, params.min_area);
    Ok(TissueMask {
        mask,
        threshold: Some(t),
    })
}
