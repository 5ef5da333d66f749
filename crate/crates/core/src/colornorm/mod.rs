//! Color normalization: linear Monge–Kantorovich transfer between RGB
//! Gaussians, HSV brightness correction and per-channel histogram matching.

mod linalg;

use serde::{Deserialize, Serialize};

pub use self::linalg::{sym_eigen, Mat3};
use self::linalg::{apply, mul, require_positive_definite, sym_fn};
use crate::error::{Error, Result};
use crate::imaging::{hsv_to_rgb, rgb_to_hsv, BinaryMask, HsvImage, Image};
use crate::scalar::Scalar;

/// Diagonal loading added to both covariances before the map is built.
pub const DEFAULT_LAMBDA: f64 = 1e-6;

/// Mean and population covariance of RGB values scaled to `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelStats<T> {
    pub mean: [T; 3],
    pub covariance: Mat3<T>,
}

impl<T: Scalar> ChannelStats<T> {
    pub fn of_pixels(pixels: &[[T; 3]]) -> Result<Self> {
        if pixels.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "color statistics need at least 2 pixels, got {}",
                pixels.len()
            )));
        }
        let n = T::from_usize(pixels.len()).unwrap();
        // Shifting by the first pixel keeps constant inputs exactly zero.
        let origin = pixels[0];
        let mut shift = [T::zero(); 3];
        for p in pixels {
            for c in 0..3 {
                shift[c] += p[c] - origin[c];
            }
        }
        shift = shift.map(|m| m / n);
        let mean = [0, 1, 2].map(|c| origin[c] + shift[c]);
        let mut cov = [[T::zero(); 3]; 3];
        for p in pixels {
            let d = [0, 1, 2].map(|c| (p[c] - origin[c]) - shift[c]);
            for i in 0..3 {
                for j in i..3 {
                    cov[i][j] += d[i] * d[j];
                }
            }
        }
        for i in 0..3 {
            for j in i..3 {
                cov[i][j] /= n;
                cov[j][i] = cov[i][j];
            }
        }
        Ok(ChannelStats { mean, covariance: cov })
    }
}

/// Pixels of `img` scaled to `[0, 1]`, restricted to `mask` when given.
pub fn scaled_pixels<T: Scalar>(img: &Image, mask: Option<&BinaryMask>) -> Result<Vec<[T; 3]>> {
    img.require_rgb()?;
    if let Some(m) = mask {
        if !m.same_dims(img) {
            return Err(Error::InvalidShape(format!(
                "mask {}x{} does not match image {}x{}",
                m.width(),
                m.height(),
                img.width(),
                img.height()
            )));
        }
    }
    let scale = T::from_f64_lossy(255.0);
    Ok(img
        .data()
        .chunks_exact(3)
        .enumerate()
        .filter(|(i, _)| mask.is_none_or(|m| m.bits()[*i]))
        .map(|(_, p)| [0, 1, 2].map(|c| T::from_u8(p[c]).unwrap() / scale))
        .collect())
}

pub fn channel_stats<T: Scalar>(img: &Image, mask: Option<&BinaryMask>) -> Result<ChannelStats<T>> {
    ChannelStats::of_pixels(&scaled_pixels::<T>(img, mask)?)
}

/// The affine map `x ↦ T (x − μs) + μt`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MvgdMap<T> {
    pub matrix: Mat3<T>,
    pub source_mean: [T; 3],
    pub target_mean: [T; 3],
}

impl<T: Scalar> MvgdMap<T> {
    /// `T = Σs^{-1/2} (Σs^{1/2} Σt Σs^{1/2})^{1/2} Σs^{-1/2}` with `λI`
    /// added to both covariances.
    pub fn new(src: &ChannelStats<T>, tgt: &ChannelStats<T>, lambda: T) -> Result<Self> {
        if !(lambda >= T::zero()) {
            return Err(Error::InvalidInput(format!("regularization must be >= 0, got {lambda}")));
        }
        let load = |m: &Mat3<T>| {
            let mut m = *m;
            for (i, row) in m.iter_mut().enumerate() {
                row[i] += lambda;
            }
            m
        };
        let cs = load(&src.covariance);
        let ct = load(&tgt.covariance);
        require_positive_definite(&cs, "source covariance")?;
        require_positive_definite(&ct, "target covariance")?;
        let s_half = sym_fn(&cs, |x| x.sqrt());
        let s_inv_half = sym_fn(&cs, |x| T::one() / x.sqrt());
        let inner = sym_fn(&mul(&s_half, &mul(&ct, &s_half)), |x| x.max(T::zero()).sqrt());
        let matrix = linalg::symmetrize(&mul(&s_inv_half, &mul(&inner, &s_inv_half)));
        if matrix.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::Numeric("color transfer matrix is not finite".into()));
        }
        Ok(MvgdMap {
            matrix,
            source_mean: src.mean,
            target_mean: tgt.mean,
        })
    }

    pub fn apply(&self, x: [T; 3]) -> [T; 3] {
        let d = [0, 1, 2].map(|c| x[c] - self.source_mean[c]);
        let y = apply(&self.matrix, d);
        [0, 1, 2].map(|c| y[c] + self.target_mean[c])
    }
}

/// Transferred pixels in `[0, 1]` units, before clamping.
pub fn mvgd_transfer_float<T: Scalar>(
    source: &Image,
    src_stats: &ChannelStats<T>,
    tgt_stats: &ChannelStats<T>,
    lambda: T,
) -> Result<Vec<[T; 3]>> {
    let map = MvgdMap::new(src_stats, tgt_stats, lambda)?;
    Ok(scaled_pixels::<T>(source, None)?.into_iter().map(|p| map.apply(p)).collect())
}

pub fn mvgd_transfer<T: Scalar>(
    source: &Image,
    src_stats: &ChannelStats<T>,
    tgt_stats: &ChannelStats<T>,
    lambda: T,
) -> Result<Image> {
    let px = mvgd_transfer_float(source, src_stats, tgt_stats, lambda)?;
    let scale = T::from_f64_lossy(255.0);
    let data = px
        .iter()
        .flat_map(|p| p.map(|v| (v.max(T::zero()).min(T::one()) * scale).round().to_u8().unwrap()))
        .collect();
    Image::from_raw(source.width(), source.height(), 3, data)
}

/// Scales V so its mean becomes `target`, clamping at 1. Hue and
/// saturation are returned untouched.
pub fn brightness_correct_hsv<T: Scalar>(hsv: &HsvImage<T>, target: T) -> Result<HsvImage<T>> {
    if !(target > T::zero() && target <= T::one()) {
        return Err(Error::InvalidInput(format!("target brightness {target} not in (0, 1]")));
    }
    let v = hsv.value();
    let mean = v.iter().copied().sum::<T>() / T::from_usize(v.len()).unwrap();
    if mean <= T::zero() {
        return Err(Error::InvalidInput("image is black; brightness cannot be scaled".into()));
    }
    let gain = target / mean;
    let mut out = hsv.clone();
    for x in out.value_mut() {
        *x = (*x * gain).min(T::one());
    }
    Ok(out)
}

pub fn hsv_brightness_correction(img: &Image, target_value_mean: f64) -> Result<Image> {
    let hsv = rgb_to_hsv::<f64>(img)?;
    hsv_to_rgb(&brightness_correct_hsv(&hsv, target_value_mean)?)
}

/// Per-channel CDF matching of 8-bit histograms.
pub fn histogram_match(img: &Image, reference: &Image) -> Result<Image> {
    img.require_rgb()?;
    reference.require_rgb()?;
    let mut out = img.clone();
    for c in 0..3 {
        let lut = match_lut(&cumulative(img, c), &cumulative(reference, c));
        for p in out.data_mut().chunks_exact_mut(3) {
            p[c] = lut[p[c] as usize];
        }
    }
    Ok(out)
}

pub(crate) fn cumulative(img: &Image, channel: usize) -> [u64; 256] {
    let mut h = [0u64; 256];
    for p in img.data().chunks_exact(3) {
        h[p[channel] as usize] += 1;
    }
    for i in 1..256 {
        h[i] += h[i - 1];
    }
    h
}

/// Each level goes to the lowest reference level whose CDF reaches its own.
fn match_lut(src: &[u64; 256], reference: &[u64; 256]) -> [u8; 256] {
    let (ns, nr) = (src[255] as u128, reference[255] as u128);
    let mut lut = [0u8; 256];
    let mut m = 0usize;
    for l in 0..256 {
        while m < 255 && (reference[m] as u128) * ns < (src[l] as u128) * nr {
            m += 1;
        }
        lut[l] = m as u8;
    }
    lut
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(seed: u64, w: usize, h: usize) -> Image {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base: [f64; 3] = [rng.random_range(40.0..200.0), rng.random_range(40.0..200.0), rng.random_range(40.0..200.0)];
        // Diagonally dominant mixing keeps the covariance well conditioned.
        let mut mix: [[f64; 3]; 3] = [[0; 3]; 3].map(|r| r.map(|_: i32| rng.random_range(-10.0..10.0)));
        for (i, row) in mix.iter_mut().enumerate() {
            row[i] = rng.random_range(25.0..40.0);
        }
        let data = (0..w * h)
            .flat_map(|_| {
                let z: [f64; 3] = [0; 3].map(|_: i32| rng.random_range(-1.0..1.0));
                [0, 1, 2].map(|c| {
                    (base[c] + mix[c][0] * z[0] + mix[c][1] * z[1] + mix[c][2] * z[2]).clamp(0.0, 255.0) as u8
                })
            })
            .collect();
        Image::from_raw(w, h, 3, data).unwrap()
    }

    #[test]
    fn constant_image_has_zero_covariance() {
        let s = channel_stats::<f64>(&Image::filled(5, 4, [10, 20, 30]), None).unwrap();
        assert_eq!(s.covariance, [[0.0; 3]; 3]);
        assert!((s.mean[1] - 20.0 / 255.0).abs() < 1e-15);
    }

    #[test]
    fn two_pixel_population_covariance() {
        let img = Image::from_raw(2, 1, 3, vec![0, 0, 0, 255, 255, 255]).unwrap();
        let s = channel_stats::<f64>(&img, None).unwrap();
        assert_eq!(s.mean, [0.5; 3]);
        assert_eq!(s.covariance, [[0.25; 3]; 3]);
        let one = Image::filled(1, 1, [1, 2, 3]);
        assert!(matches!(channel_stats::<f64>(&one, None), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn masked_stats_equal_crop_stats() {
        let img = random_image(3, 20, 16);
        let mut mask = BinaryMask::new(20, 16);
        for y in 4..12 {
            for x in 5..15 {
                mask.set(x, y, true);
            }
        }
        let a = channel_stats::<f64>(&img, Some(&mask)).unwrap();
        let b = channel_stats::<f64>(&img.crop(5, 4, 10, 8).unwrap(), None).unwrap();
        for i in 0..3 {
            assert!((a.mean[i] - b.mean[i]).abs() < 1e-12);
            for j in 0..3 {
                assert!((a.covariance[i][j] - b.covariance[i][j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn identical_stats_are_identity() {
        let img = random_image(9, 32, 32);
        let s = channel_stats::<f64>(&img, None).unwrap();
        let out = mvgd_transfer(&img, &s, &s, DEFAULT_LAMBDA).unwrap();
        let worst = img.data().iter().zip(out.data()).map(|(a, b)| a.abs_diff(*b)).max().unwrap();
        assert!(worst <= 1);
    }

    #[test]
    fn transfer_matches_target_moments() {
        let src = random_image(1, 48, 48);
        let tgt = random_image(2, 40, 40);
        let ss = channel_stats::<f64>(&src, None).unwrap();
        let ts = channel_stats::<f64>(&tgt, None).unwrap();
        let out = ChannelStats::of_pixels(&mvgd_transfer_float(&src, &ss, &ts, DEFAULT_LAMBDA).unwrap()).unwrap();
        for i in 0..3 {
            assert!((out.mean[i] - ts.mean[i]).abs() < 1e-6);
            for j in 0..3 {
                let scale = ts.covariance[i][i].max(ts.covariance[j][j]);
                assert!((out.covariance[i][j] - ts.covariance[i][j]).abs() <= 1e-3 * scale);
            }
        }
        let map = MvgdMap::new(&ss, &ts, DEFAULT_LAMBDA).unwrap();
        let (w, _) = sym_eigen(&map.matrix);
        assert!(w.iter().all(|x| *x > 0.0));
    }

    #[test]
    fn grayscale_source_is_regularized() {
        let mut img = Image::filled(16, 16, [0, 0, 0]);
        for (i, p) in img.data_mut().chunks_exact_mut(3).enumerate() {
            p.fill((i * 7 % 256) as u8);
        }
        let ss = channel_stats::<f64>(&img, None).unwrap();
        let ts = channel_stats::<f64>(&random_image(4, 16, 16), None).unwrap();
        let out = mvgd_transfer_float(&img, &ss, &ts, DEFAULT_LAMBDA).unwrap();
        assert!(out.iter().flatten().all(|v| v.is_finite()));
        assert!(matches!(
            MvgdMap::new(&ss, &ts, 0.0),
            Err(Error::Numeric(_))
        ));
        assert!(matches!(MvgdMap::new(&ss, &ts, -1.0), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn brightness_identity_and_doubling() {
        let img = random_image(5, 16, 16);
        let hsv = rgb_to_hsv::<f64>(&img).unwrap();
        let mean = hsv.value().iter().sum::<f64>() / 256.0;
        let same = hsv_brightness_correction(&img, mean).unwrap();
        assert!(img.data().iter().zip(same.data()).all(|(a, b)| a.abs_diff(*b) <= 1));

        let dim = Image::from_raw(16, 16, 3, img.data().iter().map(|v| v / 2).collect()).unwrap();
        let dh = rgb_to_hsv::<f64>(&dim).unwrap();
        assert!(dh.value().iter().all(|v| *v <= 0.5));
        let dm = dh.value().iter().sum::<f64>() / 256.0;
        let out = rgb_to_hsv::<f64>(&hsv_brightness_correction(&dim, 2.0 * dm).unwrap()).unwrap();
        for (a, b) in dh.value().iter().zip(out.value()) {
            assert_eq!(*b, 2.0 * a);
        }
        assert!(hsv_brightness_correction(&Image::filled(4, 4, [0, 0, 0]), 0.5).is_err());
        assert!(hsv_brightness_correction(&img, 0.0).is_err());
        assert!(hsv_brightness_correction(&img, 1.5).is_err());
    }

    #[test]
    fn histogram_match_identity() {
        let img = random_image(6, 30, 30);
        assert_eq!(histogram_match(&img, &img).unwrap(), img);
    }

    #[test]
    fn histogram_match_cdf_tracks_reference() {
        // Every level populated in the source.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let data: Vec<u8> = (0..64 * 64 * 3).map(|i| ((i / 3) % 256) as u8 ^ rng.random_range(0..2u8)).collect();
        let img = Image::from_raw(64, 64, 3, data).unwrap();
        let reference = random_image(12, 50, 40);
        let out = histogram_match(&img, &reference).unwrap();
        for c in 0..3 {
            let src = cumulative(&img, c);
            let max_bin = (0..256).map(|l| src[l] - if l > 0 { src[l - 1] } else { 0 }).max().unwrap() as f64 / src[255] as f64;
            let co = cumulative(&out, c);
            let cr = cumulative(&reference, c);
            for l in 0..256 {
                let d = (co[l] as f64 / co[255] as f64 - cr[l] as f64 / cr[255] as f64).abs();
                assert!(d <= max_bin + 1e-12, "channel {c} level {l}: {d} > {max_bin}");
            }
        }
    }

    proptest! {
        #[test]
        fn brightness_keeps_hue_and_saturation(seed in any::<u64>(), target in 0.05f64..1.0) {
            let hsv = rgb_to_hsv::<f64>(&random_image(seed, 8, 8)).unwrap();
            let out = brightness_correct_hsv(&hsv, target).unwrap();
            prop_assert_eq!(out.hue(), hsv.hue());
            prop_assert_eq!(out.saturation(), hsv.saturation());
        }

        #[test]
        fn histogram_match_is_monotone_and_idempotent(a in any::<u64>(), b in any::<u64>()) {
            let img = random_image(a, 12, 12);
            let reference = random_image(b, 10, 14);
            let once = histogram_match(&img, &reference).unwrap();
            let twice = histogram_match(&once, &reference).unwrap();
            prop_assert_eq!(&once, &twice);
            for c in 0..3 {
                let px: Vec<(u8, u8)> = img.data().chunks(3).zip(once.data().chunks(3)).map(|(p, q)| (p[c], q[c])).collect();
                for x in &px {
                    for y in &px {
                        if x.0 < y.0 {
                            prop_assert!(x.1 <= y.1);
                        }
                    }
                }
            }
        }

        #[test]
        fn transfer_matrix_is_spd(a in any::<u64>(), b in any::<u64>()) {
            let ss = channel_stats::<f64>(&random_image(a, 16, 16), None).unwrap();
            let ts = channel_stats::<f64>(&random_image(b, 16, 16), None).unwrap();
            let m = MvgdMap::new(&ss, &ts, DEFAULT_LAMBDA).unwrap();
            let (w, _) = sym_eigen(&m.matrix);
            prop_assert!(w.iter().all(|x| *x > 0.0));
            for i in 0..3 {
                for j in 0..3 {
                    prop_assert_eq!(m.matrix[i][j], m.matrix[j][i]);
                }
            }
        }
    }
}
