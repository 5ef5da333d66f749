use serde::{Deserialize, Serialize};

use super::image::Image;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Per-pixel hue (degrees, `[0, 360)`), saturation and value (`[0, 1]`).
#[derive(Clone, Debug, PartialEq)]
pub struct HsvImage<T> {
    width: usize,
    height: usize,
    hue: Vec<T>,
    saturation: Vec<T>,
    value: Vec<T>,
}

impl<T: Scalar> HsvImage<T> {
    pub fn from_channels(
        width: usize,
        height: usize,
        hue: Vec<T>,
        saturation: Vec<T>,
        value: Vec<T>,
    ) -> Result<Self> {
        let n = width * height;
        if n == 0 || hue.len() != n || saturation.len() != n || value.len() != n {
            return Err(Error::InvalidInput(format!(
                "HSV channels do not match {width}x{height}"
            )));
        }
        Ok(HsvImage {
            width,
            height,
            hue,
            saturation,
            value,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn hue(&self) -> &[T] {
        &self.hue
    }

    pub fn saturation(&self) -> &[T] {
        &self.saturation
    }

    pub fn value(&self) -> &[T] {
        &self.value
    }

    pub fn value_mut(&mut self) -> &mut [T] {
        &mut self.value
    }

    pub fn hue_mut(&mut self) -> &mut [T] {
        &mut self.hue
    }
}

/// A hue interval on the color circle plus saturation/value gates.
///
/// The interval is closed and taken modulo 360, so `[-20, 20]` covers
/// `[340, 360) ∪ [0, 20]`. An interval at least 360° wide admits every hue.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HueBand {
    pub lo: f64,
    pub hi: f64,
    pub sat_min: f64,
    pub val_min: f64,
}

impl Default for HueBand {
    /// The red-brown band `[-20, 20]` with no saturation/value gating.
    fn default() -> Self {
        HueBand {
            lo: -20.0,
            hi: 20.0,
            sat_min: 0.0,
            val_min: 0.0,
        }
    }
}

impl HueBand {
    pub fn new(lo: f64, hi: f64) -> Self {
        HueBand {
            lo,
            hi,
            sat_min: 0.0,
            val_min: 0.0,
        }
    }

    pub fn with_gates(mut self, sat_min: f64, val_min: f64) -> Self {
        self.sat_min = sat_min;
        self.val_min = val_min;
        self
    }

    pub fn contains_hue(&self, hue: f64) -> bool {
        let width = self.hi - self.lo;
        if width >= 360.0 {
            return true;
        }
        if width < 0.0 {
            return false;
        }
        (hue - self.lo).rem_euclid(360.0) <= width
    }

    pub fn admits(&self, hue: f64, sat: f64, val: f64) -> bool {
        sat >= self.sat_min && val >= self.val_min && self.contains_hue(hue)
    }

    /// True when the interval is inverted and admits nothing.
    pub fn is_empty(&self) -> bool {
        self.hi < self.lo
    }
}

/// Hexcone RGB → HSV. Achromatic pixels get hue 0.
pub fn rgb_to_hsv<T: Scalar>(img: &Image) -> Result<HsvImage<T>> {
    img.require_rgb()?;
    let n = img.pixel_count();
    let mut hue = Vec::with_capacity(n);
    let mut sat = Vec::with_capacity(n);
    let mut val = Vec::with_capacity(n);
    for p in img.data().chunks_exact(3) {
        let (h, s, v) = pixel_to_hsv::<T>([p[0], p[1], p[2]]);
        hue.push(h);
        sat.push(s);
        val.push(v);
    }
    HsvImage::from_channels(img.width(), img.height(), hue, sat, val)
}

pub(crate) fn pixel_to_hsv<T: Scalar>(rgb: [u8; 3]) -> (T, T, T) {
    let [r, g, b] = rgb.map(i32::from);
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let d = max - min;
    let c255 = T::from_f64_lossy(255.0);
    let v = T::from_i32(max).unwrap() / c255;
    if d == 0 {
        return (T::zero(), T::zero(), v);
    }
    let s = T::from_i32(d).unwrap() / T::from_i32(max).unwrap();
    let df = T::from_i32(d).unwrap();
    let sixty = T::from_f64_lossy(60.0);
    let sector = if max == r {
        T::from_i32(g - b).unwrap() / df
    } else if max == g {
        T::from_i32(b - r).unwrap() / df + T::from_f64_lossy(2.0)
    } else {
        T::from_i32(r - g).unwrap() / df + T::from_f64_lossy(4.0)
    };
    let mut h = sector * sixty;
    let full = T::from_f64_lossy(360.0);
    if h < T::zero() {
        h += full;
    }
    if h >= full {
        h -= full;
    }
    (h, s, v)
}

pub(crate) fn pixel_from_hsv<T: Scalar>(h: T, s: T, v: T) -> [u8; 3] {
    let c = v * s;
    let hp = h / T::from_f64_lossy(60.0);
    let two = T::from_f64_lossy(2.0);
    let x = c * (T::one() - ((hp % two) - T::one()).abs());
    let zero = T::zero();
    let (r1, g1, b1) = match hp.to_u32().unwrap_or(0) {
        0 => (c, x, zero),
        1 => (x, c, zero),
        2 => (zero, c, x),
        3 => (zero, x, c),
        4 => (x, zero, c),
        _ => (c, zero, x),
    };
    let m = v - c;
    let q = |u: T| -> u8 {
        let f = ((u + m) * T::from_f64_lossy(255.0)).round();
        f.max(zero).min(T::from_f64_lossy(255.0)).to_u8().unwrap()
    };
    [q(r1), q(g1), q(b1)]
}

/// Inverse hexcone conversion with rounding to the nearest 8-bit level.
pub fn hsv_to_rgb<T: Scalar>(img: &HsvImage<T>) -> Result<Image> {
    let full = T::from_f64_lossy(360.0);
    let mut data = Vec::with_capacity(img.width * img.height * 3);
    for i in 0..img.hue.len() {
        let (h, s, v) = (img.hue[i], img.saturation[i], img.value[i]);
        let in_range = |x: T, hi: T, closed: bool| {
            x >= T::zero() && if closed { x <= hi } else { x < hi }
        };
        if !(in_range(h, full, false) && in_range(s, T::one(), true) && in_range(v, T::one(), true))
        {
            return Err(Error::InvalidInput(format!(
                "HSV pixel {i} out of range: ({h}, {s}, {v})"
            )));
        }
        data.extend_from_slice(&pixel_from_hsv(h, s, v));
    }
    Image::from_raw(img.width, img.height, 3, data)
}

/// Number of pixels whose hue falls in `band` and that pass its gates.
pub fn count_hue_band<T: Scalar>(img: &HsvImage<T>, band: &HueBand) -> usize {
    img.hue
        .iter()
        .zip(&img.saturation)
        .zip(&img.value)
        .filter(|((h, s), v)| band.admits(h.as_f64(), s.as_f64(), v.as_f64()))
        .count()
}
