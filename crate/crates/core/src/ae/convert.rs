use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::imaging::Image;
use crate::scalar::Scalar;

/// Packs equally sized RGB images into an `(N, 3, H, W)` batch in `[0, 1]`.
pub fn images_to_tensor<T: Scalar>(images: &[&Image]) -> Result<Tensor<T>> {
    let first = images
        .first()
        .ok_or_else(|| Error::InvalidInput("empty image batch".into()))?;
    let (w, h) = (first.width(), first.height());
    let plane = w * h;
    let scale = T::one() / T::from_f64_lossy(255.0);
    let mut data = vec![T::zero(); images.len() * 3 * plane];
    for (n, img) in images.iter().enumerate() {
        img.require_rgb()?;
        if img.width() != w || img.height() != h {
            return Err(Error::InvalidShape(format!(
                "batch mixes {w}x{h} and {}x{}",
                img.width(),
                img.height()
            )));
        }
        let base = n * 3 * plane;
        for (i, px) in img.data().chunks_exact(3).enumerate() {
            for c in 0..3 {
                data[base + c * plane + i] = T::from_f64_lossy(px[c] as f64) * scale;
            }
        }
    }
    Tensor::from_vec(&[images.len(), 3, h, w], data)
}

/// Inverse of [`images_to_tensor`], rounding to the nearest level.
pub fn tensor_to_images<T: Scalar>(t: &Tensor<T>) -> Result<Vec<Image>> {
    let (n, c, h, w) = t.dims4()?;
    if c != 3 {
        return Err(Error::InvalidShape(format!("{c} channels, expected 3")));
    }
    let plane = h * w;
    (0..n)
        .map(|s| {
            let src = &t.data()[s * 3 * plane..(s + 1) * 3 * plane];
            let mut data = vec![0u8; 3 * plane];
            for i in 0..plane {
                for ch in 0..3 {
                    let v = src[ch * plane + i].as_f64().clamp(0.0, 1.0);
                    data[3 * i + ch] = (v * 255.0).round() as u8;
                }
            }
            Image::from_raw(w, h, 3, data)
        })
        .collect()
}
