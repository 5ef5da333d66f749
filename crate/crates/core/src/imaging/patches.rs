use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::image::{BinaryMask, Image};
use crate::error::{Error, Result};

pub const PATCH_SIZE: usize = 256;
/// Center spacing for inference-time windows (50% overlap).
pub const DEFAULT_STRIDE: usize = 128;

/// A 256×256 RGB window cropped from a slide.
#[derive(Clone, Debug, PartialEq)]
pub struct Patch {
    pub image: Image,
    /// Top-left corner in the parent slide.
    pub origin: (usize, usize),
    /// Border pixel the window was placed on. Differs from
    /// `origin + 128` only when the window was clamped at a slide edge.
    pub center: (usize, usize),
    pub slide_id: String,
}

impl Patch {
    pub fn new(image: Image, origin: (usize, usize), slide_id: impl Into<String>) -> Result<Self> {
        if image.width() != PATCH_SIZE || image.height() != PATCH_SIZE || image.channels() != 3 {
            return Err(Error::InvalidInput(format!(
                "patch must be {PATCH_SIZE}x{PATCH_SIZE}x3, got {}x{}x{}",
                image.width(),
                image.height(),
                image.channels()
            )));
        }
        let center = (origin.0 + PATCH_SIZE / 2, origin.1 + PATCH_SIZE / 2);
        Ok(Patch {
            image,
            origin,
            center,
            slide_id: slide_id.into(),
        })
    }

    /// `<slide_id>_x<origin_x>_y<origin_y>`
    pub fn id(&self) -> String {
        patch_id(&self.slide_id, self.origin)
    }

    pub fn file_name(&self) -> String {
        format!("{}.png", self.id())
    }

    /// Crops the window centered on `center`, shifted inside the slide.
    pub fn centered_on(img: &Image, center: (usize, usize), slide_id: &str) -> Result<Self> {
        let origin = clamp_origin(img, center);
        let image = img.crop(origin.0, origin.1, PATCH_SIZE, PATCH_SIZE)?;
        Ok(Patch {
            image,
            origin,
            center,
            slide_id: slide_id.to_owned(),
        })
    }
}

pub fn patch_id(slide_id: &str, origin: (usize, usize)) -> String {
    format!("{slide_id}_x{}_y{}", origin.0, origin.1)
}

fn clamp_origin(img: &Image, center: (usize, usize)) -> (usize, usize) {
    let half = PATCH_SIZE / 2;
    let ox = center.0.saturating_sub(half).min(img.width() - PATCH_SIZE);
    let oy = center.1.saturating_sub(half).min(img.height() - PATCH_SIZE);
    (ox, oy)
}

fn check_geometry(img: &Image, border: &BinaryMask) -> Result<()> {
    img.require_rgb()?;
    if img.width() < PATCH_SIZE || img.height() < PATCH_SIZE {
        return Err(Error::InvalidInput(format!(
            "image {}x{} is smaller than a {PATCH_SIZE}px patch",
            img.width(),
            img.height()
        )));
    }
    if !border.same_dims(img) {
        return Err(Error::InvalidInput("border mask does not match image".into()));
    }
    Ok(())
}

/// Windows centered on border pixels, scanned row-major. A pixel becomes a
/// center when it is at least `stride` (Chebyshev) from every center
/// already emitted.
pub fn extract_border_patches(
    img: &Image,
    border: &BinaryMask,
    stride: usize,
    slide_id: &str,
) -> Result<Vec<Patch>> {
    check_geometry(img, border)?;
    if stride == 0 {
        return Err(Error::InvalidInput("stride must be at least 1".into()));
    }
    let mut centers: Vec<(usize, usize)> = Vec::new();
    for (x, y) in border.points() {
        let far = centers
            .iter()
            .all(|&(cx, cy)| x.abs_diff(cx).max(y.abs_diff(cy)) >= stride);
        if far {
            centers.push((x, y));
        }
    }
    centers
        .into_iter()
        .map(|c| Patch::centered_on(img, c, slide_id))
        .collect()
}

/// `n` windows centered on border pixels drawn uniformly with replacement.
pub fn random_border_crops(
    img: &Image,
    border: &BinaryMask,
    n: usize,
    seed: u64,
    slide_id: &str,
) -> Result<Vec<Patch>> {
    check_geometry(img, border)?;
    if n == 0 {
        return Ok(Vec::new());
    }
    let points: Vec<(usize, usize)> = border.points().collect();
    if points.is_empty() {
        return Err(Error::EmptyBorder);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let c = points[rng.random_range(0..points.len())];
            Patch::centered_on(img, c, slide_id)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn canvas() -> Image {
        let mut img = Image::filled(1024, 1024, [250, 250, 250]);
        img.set_rgb(5, 5, [1, 2, 3]);
        img
    }

    #[test]
    fn empty_border_gives_no_patches() {
        let img = canvas();
        let border = BinaryMask::new(1024, 1024);
        assert!(extract_border_patches(&img, &border, 128, "s").unwrap().is_empty());
    }

    #[test]
    fn single_border_pixel() {
        let img = canvas();
        let mut border = BinaryMask::new(1024, 1024);
        border.set(300, 300, true);
        let patches = extract_border_patches(&img, &border, 128, "s").unwrap();
        assert_eq!(patches.len(), 1);
        assert_eq!(patches[0].origin, (172, 172));
        assert_eq!(patches[0].center, (300, 300));
        assert_eq!(patches[0].id(), "s_x172_y172");
    }

    #[test]
    fn horizontal_line_gives_eight_patches() {
        let img = canvas();
        let mut border = BinaryMask::new(1024, 1024);
        for x in 0..1024 {
            border.set(x, 500, true);
        }
        let patches = extract_border_patches(&img, &border, 128, "s").unwrap();
        let xs: Vec<usize> = patches.iter().map(|p| p.center.0).collect();
        assert_eq!(xs, (0..8).map(|i| i * 128).collect::<Vec<_>>());
        // Clamped at the left edge.
        assert_eq!(patches[0].origin, (0, 372));
        assert_eq!(patches[0].image, img.crop(0, 372, 256, 256).unwrap());
    }

    #[test]
    fn small_image_rejected() {
        let img = Image::filled(255, 300, [0, 0, 0]);
        let border = BinaryMask::new(255, 300);
        assert!(matches!(
            extract_border_patches(&img, &border, 128, "s"),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn random_crops_are_seeded_and_supported_on_border() {
        let img = canvas();
        let mut border = BinaryMask::new(1024, 1024);
        let support: Vec<(usize, usize)> = (0..10).map(|i| (100 + 37 * i, 900 - 41 * i)).collect();
        for &(x, y) in &support {
            border.set(x, y, true);
        }
        assert!(random_border_crops(&img, &border, 0, 1, "s").unwrap().is_empty());
        let a = random_border_crops(&img, &border, 50, 9, "s").unwrap();
        let b = random_border_crops(&img, &border, 50, 9, "s").unwrap();
        assert_eq!(a, b);
        let many = random_border_crops(&img, &border, 5000, 3, "s").unwrap();
        assert!(many.iter().all(|p| support.contains(&p.center)));
        // With 5000 draws every one of the 10 pixels shows up.
        for s in &support {
            assert!(many.iter().any(|p| p.center == *s));
        }
    }

    #[test]
    fn random_crops_need_a_border() {
        let img = canvas();
        let border = BinaryMask::new(1024, 1024);
        assert!(matches!(
            random_border_crops(&img, &border, 3, 1, "s"),
            Err(Error::EmptyBorder)
        ));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]
            #[test]
            fn centers_are_border_pixels_and_spaced(
                pts in proptest::collection::vec((0usize..400, 0usize..300), 0..300),
                stride in 1usize..200,
            ) {
                let img = Image::filled(400, 300, [200, 200, 200]);
                let mut border = BinaryMask::new(400, 300);
                for &(x, y) in &pts {
                    border.set(x, y, true);
                }
                let patches = extract_border_patches(&img, &border, stride, "p").unwrap();
                for (i, a) in patches.iter().enumerate() {
                    prop_assert!(border.get(a.center.0, a.center.1));
                    prop_assert!(a.origin.0 + 256 <= 400 && a.origin.1 + 256 <= 300);
                    for b in &patches[..i] {
                        let d = a.center.0.abs_diff(b.center.0).max(a.center.1.abs_diff(b.center.1));
                        prop_assert!(d >= stride);
                    }
                }
                // Greedy cover: every border pixel is within `stride` of a center.
                for (x, y) in border.points() {
                    prop_assert!(patches.iter().any(|p| x.abs_diff(p.center.0).max(y.abs_diff(p.center.1)) < stride));
                }
            }
        }
    }
}
