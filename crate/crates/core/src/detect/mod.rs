//! Staining-loss scoring of patches and slide-level aggregation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ae::{images_to_tensor, tensor_to_images, AeModel};
use crate::error::{Error, Result};
use crate::imaging::{
    count_hue_band, extract_border_patches, morphological_gradient, rgb_to_hsv, tissue_mask, HueBand, Image, Patch,
    TissueParams, DEFAULT_STRIDE, PATCH_SIZE,
};
use crate::stats::positive_percentage;

/// Hue band counted as brown staining.
pub type BrownBand = HueBand;

/// Additive smoothing of both counts in the score ratio.
pub const DEFAULT_EPSILON: f64 = 1.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatchScore {
    pub patch_id: String,
    pub origin: (usize, usize),
    pub f_brown: f64,
    pub n_orig: usize,
    pub n_rec: usize,
    pub positive: bool,
}

/// Number of pixels of `img` inside `band`.
pub fn brown_count(img: &Image, band: &BrownBand) -> Result<usize> {
    Ok(count_hue_band(&rgb_to_hsv::<f64>(img)?, band))
}

/// `(n_orig + ε) / (n_rec + ε)`.
pub fn brown_ratio(n_orig: usize, n_rec: usize, epsilon: f64) -> f64 {
    (n_orig as f64 + epsilon) / (n_rec as f64 + epsilon)
}

/// Fraction of brown pixels lost in reconstruction; values above 1 mean
/// the autoencoder removed brown.
pub fn f_brown(original: &Patch, reconstruction: &Image, band: &BrownBand, epsilon: f64) -> Result<PatchScore> {
    let o = &original.image;
    if o.width() != reconstruction.width() || o.height() != reconstruction.height() {
        return Err(Error::InvalidInput(format!(
            "reconstruction {}x{} does not match patch {}x{}",
            reconstruction.width(),
            reconstruction.height(),
            o.width(),
            o.height()
        )));
    }
    let n_orig = brown_count(o, band)?;
    let n_rec = brown_count(reconstruction, band)?;
    Ok(PatchScore {
        patch_id: original.id(),
        origin: original.origin,
        f_brown: brown_ratio(n_orig, n_rec, epsilon),
        n_orig,
        n_rec,
        positive: false,
    })
}

pub fn classify_patch(score: &PatchScore, t_patch: f64) -> bool {
    score.f_brown >= t_patch
}

/// Percentage of patches at or above `t_patch`.
pub fn slide_probability(scores: &[PatchScore], t_patch: f64) -> Result<f64> {
    let values: Vec<f64> = scores.iter().map(|s| s.f_brown).collect();
    positive_percentage(&values, t_patch)
}

/// Share of brown pixels in a patch, the score of the thresholding baseline.
pub fn baseline_red_fraction(patch: &Image, band: &BrownBand) -> Result<f64> {
    Ok(brown_count(patch, band)? as f64 / patch.pixel_count() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Diagnosis {
    Positive,
    Negative,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub t_patch: f64,
    /// Percent of positive patches.
    pub t_slide: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlideScore {
    pub slide_id: String,
    pub thresholds: Thresholds,
    pub positive_fraction: f64,
    pub diagnosis: Diagnosis,
    pub patch_scores: Vec<PatchScore>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoreConfig {
    pub band: BrownBand,
    pub epsilon: f64,
    pub stride: usize,
    pub se_radius: usize,
    pub tissue: TissueParams,
    /// Patches reconstructed per forward pass.
    pub batch_size: usize,
}

impl Default for ScoreConfig {
    fn default() -> Self {
        ScoreConfig {
            band: BrownBand::default(),
            epsilon: DEFAULT_EPSILON,
            stride: DEFAULT_STRIDE,
            se_radius: 1,
            tissue: TissueParams::default(),
            batch_size: 8,
        }
    }
}

/// Tissue mask, its border, and the windows along that border.
pub fn border_patches(img: &Image, cfg: &ScoreConfig, slide_id: &str) -> Result<Vec<Patch>> {
    let tissue = tissue_mask(img, &cfg.tissue)?;
    if tissue.mask.count() == 0 {
        return Err(Error::EmptySlide(format!("{slide_id}: no tissue found")));
    }
    let border = morphological_gradient(&tissue.mask, cfg.se_radius);
    let patches = extract_border_patches(img, &border, cfg.stride, slide_id)?;
    if patches.is_empty() {
        return Err(Error::EmptySlide(format!("{slide_id}: tissue has no border")));
    }
    Ok(patches)
}

/// Eval-mode reconstructions of `patches`, in order.
pub fn reconstruct_patches(model: &AeModel<f32>, patches: &[&Image], batch_size: usize) -> Result<Vec<Image>> {
    let mut out = Vec::with_capacity(patches.len());
    for chunk in patches.chunks(batch_size.max(1)) {
        let x = images_to_tensor::<f32>(chunk)?;
        out.extend(tensor_to_images(&model.reconstruct(&x)?)?);
    }
    Ok(out)
}

/// F_brown of each patch against its reconstruction.
pub fn score_patches(model: &AeModel<f32>, patches: &[Patch], cfg: &ScoreConfig) -> Result<Vec<PatchScore>> {
    for p in patches {
        if p.image.width() != PATCH_SIZE || p.image.height() != PATCH_SIZE {
            return Err(Error::InvalidInput(format!("patch {} is not {PATCH_SIZE}px", p.id())));
        }
    }
    let images: Vec<&Image> = patches.iter().map(|p| &p.image).collect();
    let recs = reconstruct_patches(model, &images, cfg.batch_size)?;
    patches
        .par_iter()
        .zip(recs.par_iter())
        .map(|(p, r)| f_brown(p, r, &cfg.band, cfg.epsilon))
        .collect()
}

/// Applies the thresholds to already computed patch scores.
pub fn aggregate(slide_id: &str, mut scores: Vec<PatchScore>, thresholds: Thresholds) -> Result<SlideScore> {
    for s in &mut scores {
        s.positive = classify_patch(s, thresholds.t_patch);
    }
    let positive_fraction = slide_probability(&scores, thresholds.t_patch)?;
    let diagnosis = if positive_fraction >= thresholds.t_slide {
        Diagnosis::Positive
    } else {
        Diagnosis::Negative
    };
    Ok(SlideScore {
        slide_id: slide_id.to_owned(),
        thresholds,
        positive_fraction,
        diagnosis,
        patch_scores: scores,
    })
}

/// Full slide pipeline: tissue border, windows, reconstruction, scores,
/// and the slide-level call.
pub fn score_slide(
    img: &Image,
    model: &AeModel<f32>,
    cfg: &ScoreConfig,
    thresholds: Thresholds,
    slide_id: &str,
) -> Result<SlideScore> {
    let patches = border_patches(img, cfg, slide_id)?;
    let scores = score_patches(model, &patches, cfg)?;
    aggregate(slide_id, scores, thresholds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::color::pixel_from_hsv;
    fn pixel_from_hsv_f64(h: f64, s: f64, v: f64) -> [u8; 3] {
        pixel_from_hsv(h, s, v)
    }
    use proptest::prelude::*;

    fn patch_with_brown(n: usize) -> Patch {
        let mut img = Image::filled(PATCH_SIZE, PATCH_SIZE, [40, 60, 200]);
        for i in 0..n {
            img.set_rgb(i % PATCH_SIZE, i / PATCH_SIZE, [160, 40, 20]);
        }
        Patch::new(img, (0, 0), "s").unwrap()
    }

    #[test]
    fn identical_reconstruction_scores_one() {
        let p = patch_with_brown(300);
        let s = f_brown(&p, &p.image, &BrownBand::default(), 1.0).unwrap();
        assert_eq!(s.f_brown, 1.0);
        let blue = patch_with_brown(0);
        let s = f_brown(&blue, &blue.image, &BrownBand::default(), 1.0).unwrap();
        assert_eq!((s.n_orig, s.n_rec, s.f_brown), (0, 0, 1.0));
    }

    #[test]
    fn forty_versus_ten() {
        // Hue 10° is inside the band, 200° is not.
        let mut orig = Image::filled(PATCH_SIZE, PATCH_SIZE, pixel_from_hsv_f64(200.0, 0.7, 0.7));
        let mut rec = orig.clone();
        let brown = pixel_from_hsv_f64(10.0, 0.8, 0.6);
        for i in 0..40 {
            orig.set_rgb(i, 5, brown);
        }
        for i in 0..10 {
            rec.set_rgb(i, 9, brown);
        }
        let p = Patch::new(orig, (0, 0), "s").unwrap();
        let s = f_brown(&p, &rec, &BrownBand::default(), 1.0).unwrap();
        assert_eq!((s.n_orig, s.n_rec), (40, 10));
        assert!((s.f_brown - 41.0 / 11.0).abs() < 1e-15);
        assert!((s.f_brown - 3.727).abs() < 1e-3);
    }

    #[test]
    fn dimension_mismatch() {
        let p = patch_with_brown(0);
        let small = Image::filled(10, 10, [0, 0, 0]);
        assert!(matches!(f_brown(&p, &small, &BrownBand::default(), 1.0), Err(Error::InvalidInput(_))));
    }

    fn score(f: f64) -> PatchScore {
        PatchScore {
            patch_id: String::new(),
            origin: (0, 0),
            f_brown: f,
            n_orig: 0,
            n_rec: 0,
            positive: false,
        }
    }

    #[test]
    fn classification_boundary() {
        assert!(classify_patch(&score(1.5), 1.5));
        assert!(!classify_patch(&score(1.0), 1.5));
    }

    #[test]
    fn slide_percentages() {
        let mut scores: Vec<PatchScore> = (0..93).map(|_| score(1.0)).collect();
        scores.extend((0..7).map(|_| score(2.0)));
        assert_eq!(slide_probability(&scores, 1.5).unwrap(), 7.0);
        let s = aggregate("x", scores, Thresholds { t_patch: 1.5, t_slide: 6.18 }).unwrap();
        assert_eq!(s.diagnosis, Diagnosis::Positive);
        assert_eq!(s.patch_scores.iter().filter(|p| p.positive).count(), 7);
        assert_eq!(slide_probability(&[score(3.0), score(4.0)], 1.5).unwrap(), 100.0);
        assert!(matches!(slide_probability(&[], 1.0), Err(Error::EmptySlide(_))));
    }

    #[test]
    fn baseline_fraction() {
        let band = BrownBand::default();
        assert_eq!(baseline_red_fraction(&patch_with_brown(0).image, &band).unwrap(), 0.0);
        let f = baseline_red_fraction(&patch_with_brown(655).image, &band).unwrap();
        assert_eq!(f, 655.0 / 65536.0);
        assert!((f - 0.01).abs() < 1e-3);
        let all = Image::filled(PATCH_SIZE, PATCH_SIZE, [160, 40, 20]);
        assert_eq!(baseline_red_fraction(&all, &band).unwrap(), 1.0);
    }

    #[test]
    fn blank_slide_is_empty() {
        let img = Image::filled(512, 512, [255, 255, 255]);
        let model = AeModel::<f32>::new(0);
        let t = Thresholds { t_patch: 1.0, t_slide: 5.0 };
        assert!(matches!(
            score_slide(&img, &model, &ScoreConfig::default(), t, "blank"),
            Err(Error::EmptySlide(_))
        ));
    }

    proptest! {
        #[test]
        fn ratio_monotone_in_counts(a in 0usize..10_000, b in 0usize..10_000) {
            prop_assert!(brown_ratio(a + 1, b, 1.0) >= brown_ratio(a, b, 1.0));
            prop_assert!(brown_ratio(a, b + 1, 1.0) <= brown_ratio(a, b, 1.0));
        }

        #[test]
        fn threshold_decisions_survive_increasing_transforms(
            fs in proptest::collection::vec(0.0f64..10.0, 1..50),
            t in 0.0f64..10.0,
        ) {
            let g = |v: f64| (v + 1.0).ln() * 3.0 + 2.0;
            for f in &fs {
                prop_assert_eq!(classify_patch(&score(*f), t), classify_patch(&score(g(*f)), g(t)));
            }
            let scores: Vec<PatchScore> = fs.iter().map(|&f| score(f)).collect();
            let p = slide_probability(&scores, t).unwrap();
            prop_assert!((0.0..=100.0).contains(&p));
            prop_assert_eq!(p == 0.0, scores.iter().all(|s| !classify_patch(s, t)));
        }

        #[test]
        fn score_ignores_pixel_order(seed in any::<u64>()) {
            use rand::{seq::SliceRandom, SeedableRng};
            let p = patch_with_brown(500);
            let rec = patch_with_brown(120).image;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut px: Vec<[u8; 3]> = p.image.data().chunks(3).map(|c| [c[0], c[1], c[2]]).collect();
            px.shuffle(&mut rng);
            let shuffled = Image::from_raw(PATCH_SIZE, PATCH_SIZE, 3, px.concat()).unwrap();
            let a = f_brown(&p, &rec, &BrownBand::default(), 1.0).unwrap();
            let b = f_brown(&Patch::new(shuffled, (0, 0), "s").unwrap(), &rec, &BrownBand::default(), 1.0).unwrap();
            prop_assert_eq!(a.f_brown, b.f_brown);
        }
    }
}
