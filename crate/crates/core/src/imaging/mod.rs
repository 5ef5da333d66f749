//! Raster primitives: 8-bit images, binary masks, HSV conversion, tissue
//! masking, border morphology and patch cropping.

pub(crate) mod color;
mod image;
pub mod io;
mod morphology;
mod patches;
mod tissue;

pub use self::color::{count_hue_band, hsv_to_rgb, rgb_to_hsv, HsvImage, HueBand};
pub use self::image::{BinaryMask, Image};
pub use self::morphology::{dilate, erode, morphological_gradient, opening};
pub use self::patches::{
    extract_border_patches, patch_id, random_border_crops, Patch, DEFAULT_STRIDE, PATCH_SIZE,
};
pub use self::tissue::{otsu_threshold, tissue_mask, TissueMask, TissueParams};
