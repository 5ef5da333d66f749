//! Deterministic synthetic IHC-like patches and slides with known ground
//! truth: bluish counterstained tissue on a white background, with
//! elliptical brown blobs near tissue borders for positive slides.

mod dataset;

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

pub use self::dataset::{gen_dataset, patch_labels, SLIDE_DIR, PATCH_DIR, TRUTH_DIR, MANIFEST_FILE};
use crate::error::{Error, Result};
use crate::imaging::color::{pixel_from_hsv, pixel_to_hsv};
use crate::imaging::{BinaryMask, HueBand, Image, Patch, PATCH_SIZE};

/// Attempts per blob before giving up on a non-overlapping position.
pub const PLACEMENT_ATTEMPTS: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DensityClass {
    Negative,
    Low,
    High,
}

impl DensityClass {
    pub const ALL: [DensityClass; 3] = [DensityClass::Negative, DensityClass::Low, DensityClass::High];

    pub fn is_positive(self) -> bool {
        self != DensityClass::Negative
    }

    pub fn name(self) -> &'static str {
        match self {
            DensityClass::Negative => "negative",
            DensityClass::Low => "low",
            DensityClass::High => "high",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub seed: u64,
    pub n_negative: usize,
    pub n_low: usize,
    pub n_high: usize,
    /// Inclusive blob count range per infected site, low class.
    pub blobs_low: (usize, usize),
    pub blobs_high: (usize, usize),
    /// Inclusive number of infected sites on a positive slide.
    pub clusters_per_slide: (usize, usize),
    pub tissue_hue_range: (f64, f64),
    /// May start below zero; wrapped onto `[0, 360)`.
    pub blob_hue_range: (f64, f64),
    /// Per-channel Gaussian noise, in 8-bit levels.
    pub noise_sigma: f64,
    /// Inclusive range of ellipse semi-axes, pixels.
    pub blob_radius: (f64, f64),
    pub slide_size: usize,
    pub regions_per_slide: (usize, usize),
    /// Blobs lie within this many pixels inside a tissue border.
    pub border_band: f64,
    /// Share of each class assigned to the training split.
    pub train_fraction: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            seed: 42,
            n_negative: 20,
            n_low: 15,
            n_high: 15,
            blobs_low: (1, 3),
            blobs_high: (8, 20),
            clusters_per_slide: (3, 6),
            tissue_hue_range: (210.0, 260.0),
            blob_hue_range: (-15.0, 15.0),
            noise_sigma: 8.0,
            blob_radius: (2.0, 8.0),
            slide_size: 2048,
            regions_per_slide: (1, 3),
            border_band: 16.0,
            train_fraction: 0.5,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        let ordered = |r: (usize, usize)| r.0 <= r.1;
        if self.blobs_low.0 == 0 || self.blobs_high.0 == 0 {
            return bad("positive classes need at least one blob per site".into());
        }
        if !ordered(self.blobs_low) || !ordered(self.blobs_high) || !ordered(self.clusters_per_slide) {
            return bad("count ranges must satisfy lo <= hi".into());
        }
        if self.clusters_per_slide.0 == 0 {
            return bad("positive slides need at least one infected site".into());
        }
        if self.regions_per_slide.0 == 0 || !ordered(self.regions_per_slide) {
            return bad(format!("regions_per_slide {:?} must be >= 1 and ordered", self.regions_per_slide));
        }
        let (r0, r1) = self.blob_radius;
        if !(r0 >= 1.0 && r0 <= r1 && r1 < 64.0) {
            return bad(format!("blob_radius {:?} out of range", self.blob_radius));
        }
        let (h0, h1) = self.tissue_hue_range;
        if !(0.0..360.0).contains(&h0) || !(h0..360.0).contains(&h1) {
            return bad(format!("tissue_hue_range {:?} outside [0, 360)", self.tissue_hue_range));
        }
        let (b0, b1) = self.blob_hue_range;
        if !(b0 <= b1 && b1 - b0 < 360.0 && b0 > -360.0 && b1 < 360.0) {
            return bad(format!("blob_hue_range {:?} invalid", self.blob_hue_range));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad("noise_sigma must be finite and >= 0".into());
        }
        if self.slide_size < 2 * PATCH_SIZE {
            return bad(format!("slide_size must be at least {}", 2 * PATCH_SIZE));
        }
        if !(0.0..=1.0).contains(&self.train_fraction) {
            return bad("train_fraction must lie in [0, 1]".into());
        }
        Ok(())
    }

    pub fn count(&self, class: DensityClass) -> usize {
        match class {
            DensityClass::Negative => self.n_negative,
            DensityClass::Low => self.n_low,
            DensityClass::High => self.n_high,
        }
    }

    pub fn blob_range(&self, class: DensityClass) -> (usize, usize) {
        match class {
            DensityClass::Negative => (0, 0),
            DensityClass::Low => self.blobs_low,
            DensityClass::High => self.blobs_high,
        }
    }
}

/// Stateless per-item seed derivation (SplitMix64 finalizer).
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The hue-only band healthy tissue must avoid.
fn forbidden_band() -> HueBand {
    HueBand::default()
}

/// Smooth bluish stain: a few low-frequency waves modulate hue and value,
/// then white noise is added per channel.
struct Texture {
    hue: f64,
    sat: f64,
    val: f64,
    waves: Vec<(f64, f64, f64, f64)>,
    noise: Normal<f64>,
}

impl Texture {
    fn new(spec: &SynthSpec, rng: &mut ChaCha8Rng) -> Self {
        let (h0, h1) = spec.tissue_hue_range;
        let margin = ((h1 - h0) * 0.2).min(8.0);
        let waves = (0..4)
            .map(|_| {
                let f = rng.random_range(0.005..0.03);
                let theta = rng.random_range(0.0..TAU);
                (f * theta.cos(), f * theta.sin(), rng.random_range(0.0..TAU), rng.random_range(0.3..1.0))
            })
            .collect();
        Texture {
            hue: rng.random_range(h0 + margin..=h1 - margin),
            sat: rng.random_range(0.45..0.6),
            val: rng.random_range(0.55..0.7),
            waves,
            noise: Normal::new(0.0, spec.noise_sigma).unwrap(),
        }
        .with_margin(margin)
    }

    fn with_margin(mut self, margin: f64) -> Self {
        self.waves.iter_mut().for_each(|w| w.3 *= margin / 4.0);
        self
    }

    fn base(&self, x: f64, y: f64) -> [u8; 3] {
        let field: f64 = self.waves.iter().map(|&(fx, fy, ph, a)| a * (fx * x + fy * y + ph).sin()).sum();
        let h = (self.hue + field).rem_euclid(360.0);
        let v = (self.val * (1.0 + 0.02 * field)).clamp(0.0, 1.0);
        pixel_from_hsv(h, self.sat, v)
    }

    fn pixel(&self, x: usize, y: usize, rng: &mut ChaCha8Rng) -> [u8; 3] {
        let base = self.base(x as f64, y as f64);
        let noisy = base.map(|c| (c as f64 + self.noise.sample(rng)).round().clamp(0.0, 255.0) as u8);
        let (h, s, v) = pixel_to_hsv::<f64>(noisy);
        if forbidden_band().admits(h, s, v) {
            base
        } else {
            noisy
        }
    }
}

/// An ellipse with semi-axes `(a, b)` rotated by `angle`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Blob {
    pub center: (f64, f64),
    pub axes: (f64, f64),
    pub angle: f64,
    pub hue: f64,
    pub saturation: f64,
    pub value: f64,
}

impl Blob {
    fn random(spec: &SynthSpec, center: (f64, f64), rng: &mut ChaCha8Rng) -> Self {
        let (r0, r1) = spec.blob_radius;
        let (b0, b1) = spec.blob_hue_range;
        Blob {
            center,
            axes: (rng.random_range(r0..=r1), rng.random_range(r0..=r1)),
            angle: rng.random_range(0.0..std::f64::consts::PI),
            hue: rng.random_range(b0..=b1).rem_euclid(360.0),
            saturation: rng.random_range(0.75..0.95),
            value: rng.random_range(0.5..0.7),
        }
    }

    pub fn extent(&self) -> f64 {
        self.axes.0.max(self.axes.1)
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (dx, dy) = (x - self.center.0, y - self.center.1);
        let (s, c) = self.angle.sin_cos();
        let u = (dx * c + dy * s) / self.axes.0;
        let v = (-dx * s + dy * c) / self.axes.1;
        u * u + v * v <= 1.0
    }

    /// Supports are disjoint with a one-pixel gap.
    fn clear_of(&self, other: &Blob) -> bool {
        let d = (self.center.0 - other.center.0).hypot(self.center.1 - other.center.1);
        d > self.extent() + other.extent() + 1.0
    }

    fn pixel_box(&self, w: usize, h: usize) -> (usize, usize, usize, usize) {
        let e = self.extent().ceil();
        let lo = |c: f64| (c - e).floor().max(0.0) as usize;
        let x1 = ((self.center.0 + e).ceil() as usize + 1).min(w);
        let y1 = ((self.center.1 + e).ceil() as usize + 1).min(h);
        (lo(self.center.0), lo(self.center.1), x1, y1)
    }

    fn paint(&self, img: &mut Image, mask: &mut BinaryMask, noise: &Normal<f64>, rng: &mut ChaCha8Rng) {
        let base = pixel_from_hsv(self.hue, self.saturation, self.value);
        let (x0, y0, x1, y1) = self.pixel_box(img.width(), img.height());
        for y in y0..y1 {
            for x in x0..x1 {
                if self.contains(x as f64, y as f64) {
                    let px = base.map(|c| (c as f64 + noise.sample(rng)).round().clamp(0.0, 255.0) as u8);
                    img.set_rgb(x, y, px);
                    mask.set(x, y, true);
                }
            }
        }
    }
}

fn healthy_image(spec: &SynthSpec, w: usize, h: usize, rng: &mut ChaCha8Rng) -> Image {
    let tex = Texture::new(spec, rng);
    let mut img = Image::filled(w, h, [0, 0, 0]);
    for y in 0..h {
        for x in 0..w {
            img.set_rgb(x, y, tex.pixel(x, y, rng));
        }
    }
    img
}

/// A 256×256 patch of healthy bluish tissue.
pub fn gen_healthy_patch(spec: &SynthSpec, seed: u64) -> Patch {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let img = healthy_image(spec, PATCH_SIZE, PATCH_SIZE, &mut rng);
    Patch::new(img, (0, 0), format!("healthy-{seed}")).expect("patch size is fixed")
}

/// Healthy tissue with `n_blobs` disjoint brown ellipses; also returns
/// the blob support mask.
pub fn gen_infected_patch(spec: &SynthSpec, seed: u64, n_blobs: usize) -> Result<(Patch, BinaryMask)> {
    if n_blobs == 0 {
        return Err(Error::InvalidInput("an infected patch needs at least one blob".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut img = healthy_image(spec, PATCH_SIZE, PATCH_SIZE, &mut rng);
    let mut blobs: Vec<Blob> = Vec::with_capacity(n_blobs);
    let r1 = spec.blob_radius.1;
    let span = r1..=(PATCH_SIZE as f64 - 1.0 - r1);
    for _ in 0..n_blobs {
        let mut placed = false;
        for _ in 0..PLACEMENT_ATTEMPTS {
            let c = (rng.random_range(span.clone()), rng.random_range(span.clone()));
            let b = Blob::random(spec, c, &mut rng);
            if blobs.iter().all(|o| b.clear_of(o)) {
                blobs.push(b);
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(Error::Placement {
                requested: n_blobs,
                attempts: PLACEMENT_ATTEMPTS,
            });
        }
    }
    let mut mask = BinaryMask::new(PATCH_SIZE, PATCH_SIZE);
    let noise = Normal::new(0.0, spec.noise_sigma).unwrap();
    for b in &blobs {
        b.paint(&mut img, &mut mask, &noise, &mut rng);
    }
    let patch = Patch::new(img, (0, 0), format!("infected-{seed}"))?;
    Ok((patch, mask))
}

/// Star-shaped tissue section: boundary radius `r(θ) = R (1 + Σ a_k sin(kθ + φ_k))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub center: (f64, f64),
    pub radius: f64,
    /// `(k, a_k, φ_k)` harmonics.
    pub harmonics: Vec<(u32, f64, f64)>,
}

impl Region {
    pub fn boundary(&self, theta: f64) -> f64 {
        let wobble: f64 = self.harmonics.iter().map(|&(k, a, p)| a * (k as f64 * theta + p).sin()).sum();
        self.radius * (1.0 + wobble)
    }

    pub fn max_extent(&self) -> f64 {
        self.radius * (1.0 + self.harmonics.iter().map(|h| h.1.abs()).sum::<f64>())
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (dx, dy) = (x - self.center.0, y - self.center.1);
        dx.hypot(dy) < self.boundary(dy.atan2(dx))
    }

    /// Point at angle `theta`, `depth` pixels inside the boundary.
    pub fn inset_point(&self, theta: f64, depth: f64) -> (f64, f64) {
        let r = self.boundary(theta) - depth;
        (self.center.0 + r * theta.cos(), self.center.1 + r * theta.sin())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlideTruth {
    pub slide_id: String,
    pub class: DensityClass,
    pub seed: u64,
    pub regions: Vec<Region>,
    pub blobs: Vec<Blob>,
    /// Blob support, one bit per slide pixel.
    #[serde(skip)]
    pub blob_mask: Option<BinaryMask>,
}

impl SlideTruth {
    pub fn positive(&self) -> bool {
        !self.blobs.is_empty()
    }

    pub fn blob_centers(&self) -> Vec<(f64, f64)> {
        self.blobs.iter().map(|b| b.center).collect()
    }
}

fn place_regions(spec: &SynthSpec, rng: &mut ChaCha8Rng) -> Vec<Region> {
    let size = spec.slide_size as f64;
    let scale = size / 2048.0;
    let want = rng.random_range(spec.regions_per_slide.0..=spec.regions_per_slide.1);
    let margin = 24.0;
    let mut regions: Vec<Region> = Vec::new();
    for _ in 0..want {
        for _ in 0..PLACEMENT_ATTEMPTS {
            let harmonics = (2..=5)
                .map(|k| (k, rng.random_range(0.0..0.05), rng.random_range(0.0..TAU)))
                .collect();
            let mut r = Region {
                center: (0.0, 0.0),
                radius: rng.random_range(220.0..360.0) * scale,
                harmonics,
            };
            let ext = r.max_extent();
            if 2.0 * (ext + margin) >= size {
                continue;
            }
            r.center = (
                rng.random_range(ext + margin..size - ext - margin),
                rng.random_range(ext + margin..size - ext - margin),
            );
            let clear = regions.iter().all(|o| {
                let d = (r.center.0 - o.center.0).hypot(r.center.1 - o.center.1);
                d > ext + o.max_extent() + 2.0 * margin
            });
            if clear {
                regions.push(r);
                break;
            }
        }
    }
    regions
}

/// Blob sites: each picks a region and an arc, then scatters its blobs
/// along that arc inside the border band.
fn place_blobs(spec: &SynthSpec, class: DensityClass, regions: &[Region], rng: &mut ChaCha8Rng) -> Vec<Blob> {
    if !class.is_positive() || regions.is_empty() {
        return Vec::new();
    }
    let (lo, hi) = spec.blob_range(class);
    let sites = rng.random_range(spec.clusters_per_slide.0..=spec.clusters_per_slide.1);
    let arc_half = 0.6 * PATCH_SIZE as f64;
    let mut blobs: Vec<Blob> = Vec::new();
    for _ in 0..sites {
        let region = &regions[rng.random_range(0..regions.len())];
        let theta_c = rng.random_range(0.0..TAU);
        let n = rng.random_range(lo..=hi);
        let mut site: Vec<Blob> = Vec::new();
        for _ in 0..n {
            for _ in 0..PLACEMENT_ATTEMPTS {
                let theta = theta_c + rng.random_range(-arc_half..arc_half) / region.radius;
                let mut b = Blob::random(spec, (0.0, 0.0), rng);
                let e = b.extent();
                let depth_hi = (spec.border_band - e).max(e);
                let depth = rng.random_range(e..=depth_hi);
                b.center = region.inset_point(theta, depth);
                if blobs.iter().chain(&site).all(|o| b.clear_of(o)) {
                    site.push(b);
                    break;
                }
            }
        }
        if site.is_empty() {
            log::debug!("blob site at {theta_c:.2} rad left empty");
        }
        blobs.extend(site);
    }
    blobs
}

/// A white `slide_size²` slide with 1–3 tissue sections; positive classes
/// add brown blobs near section borders.
pub fn gen_synthetic_slide(spec: &SynthSpec, seed: u64, class: DensityClass) -> Result<(Image, SlideTruth)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let size = spec.slide_size;
    let regions = place_regions(spec, &mut rng);
    let tex = Texture::new(spec, &mut rng);
    let mut img = Image::filled(size, size, [255, 255, 255]);
    for r in &regions {
        let e = r.max_extent().ceil();
        let y0 = (r.center.1 - e).max(0.0) as usize;
        let y1 = ((r.center.1 + e) as usize + 1).min(size);
        let x0 = (r.center.0 - e).max(0.0) as usize;
        let x1 = ((r.center.0 + e) as usize + 1).min(size);
        for y in y0..y1 {
            for x in x0..x1 {
                if r.contains(x as f64, y as f64) {
                    img.set_rgb(x, y, tex.pixel(x, y, &mut rng));
                }
            }
        }
    }
    let blobs = place_blobs(spec, class, &regions, &mut rng);
    let mut mask = BinaryMask::new(size, size);
    let noise = Normal::new(0.0, spec.noise_sigma).unwrap();
    for b in &blobs {
        b.paint(&mut img, &mut mask, &noise, &mut rng);
    }
    let truth = SlideTruth {
        slide_id: String::new(),
        class,
        seed,
        regions,
        blobs,
        blob_mask: Some(mask),
    };
    Ok((img, truth))
}
