use std::path::Path;

use stainscope::colornorm::{channel_stats, histogram_match, hsv_brightness_correction, mvgd_transfer, ChannelStats};
use stainscope::imaging::io::{load_rgb, save_png};
use stainscope::imaging::{rgb_to_hsv, tissue_mask, Image};

use crate::config::RunConfig;
use crate::error::CliResult;

/// Statistics over tissue pixels, or the whole image when the mask is too small.
fn tissue_stats(img: &Image, cfg: &RunConfig) -> CliResult<ChannelStats<f64>> {
    let mask = tissue_mask(img, &cfg.tissue)?.mask;
    let mask = (mask.count() >= 2).then_some(mask);
    Ok(channel_stats::<f64>(img, mask.as_ref())?)
}

pub fn run(source: &Path, reference: &Path, out: &Path, skip_hist: bool, lambda: f64, cfg: &RunConfig) -> CliResult<()> {
    let src = load_rgb(source)?;
    let refimg = load_rgb(reference)?;
    let transferred = mvgd_transfer(&src, &tissue_stats(&src, cfg)?, &tissue_stats(&refimg, cfg)?, lambda)?;
    let v = rgb_to_hsv::<f64>(&refimg)?;
    let target = v.value().iter().sum::<f64>() / v.value().len() as f64;
    let mut img = hsv_brightness_correction(&transferred, target)?;
    if !skip_hist {
        img = histogram_match(&img, &refimg)?;
    }
    save_png(&img, out)?;
    Ok(())
}
