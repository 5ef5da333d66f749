//! PNG (and 8-bit TIFF) raster I/O through the `image` crate.

use std::path::Path;

use super::image::Image;
use crate::error::{Error, Result};

/// Reads any supported raster and converts it to 8-bit RGB.
pub fn load_rgb(path: &Path) -> Result<Image> {
    let dynamic = image::open(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })?;
    let rgb = dynamic.into_rgb8();
    let (w, h) = rgb.dimensions();
    Image::from_raw(w as usize, h as usize, 3, rgb.into_raw())
}

pub fn save_png(img: &Image, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    let color = match img.channels() {
        3 => image::ExtendedColorType::Rgb8,
        _ => image::ExtendedColorType::L8,
    };
    image::save_buffer_with_format(
        path,
        img.data(),
        img.width() as u32,
        img.height() as u32,
        color,
        image::ImageFormat::Png,
    )
    .map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })
}
