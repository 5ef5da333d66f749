use std::path::{Path, PathBuf};

use stainscope::detect::border_patches;
use stainscope::imaging::io::{load_rgb, save_png};
use stainscope::manifest::{DatasetManifest, PatchEntry, PatchLabel, SlideEntry};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::pipeline::ensure_dir;

pub const PATCH_DIR: &str = "patches";
pub const MANIFEST_FILE: &str = "manifest.json";

fn extract_slide(m: &DatasetManifest, s: &SlideEntry, out_dir: &Path, cfg: &RunConfig) -> stainscope::Result<SlideEntry> {
    let src = m.resolve(&s.image_path);
    let img = load_rgb(&src)?;
    let patches = border_patches(&img, &cfg.score_config(), &s.slide_id)?;
    let mut entries = Vec::with_capacity(patches.len());
    for p in &patches {
        let rel = PathBuf::from(PATCH_DIR).join(&s.slide_id).join(p.file_name());
        save_png(&p.image, &out_dir.join(&rel))?;
        // Keep existing annotations for windows at the same origin.
        let label = s
            .patches
            .iter()
            .find(|e| e.origin == p.origin)
            .map(|e| e.label)
            .unwrap_or(PatchLabel::Unlabeled);
        entries.push(PatchEntry {
            patch_path: rel,
            origin: p.origin,
            label,
        });
    }
    let image_path = std::fs::canonicalize(&src).map_err(|e| stainscope::Error::Io { path: src, source: e })?;
    Ok(SlideEntry {
        image_path,
        patches: entries,
        ..s.clone()
    })
}

/// Writes `<out-dir>/manifest.json`. Slides that fail are logged, left
/// out of the new manifest, and make the command exit nonzero.
pub fn run(manifest: &Path, out_dir: &Path, cfg: &RunConfig) -> CliResult<()> {
    let m = DatasetManifest::load(manifest)?;
    ensure_dir(out_dir)?;
    let mut out = DatasetManifest::new(out_dir);
    let mut failed = 0;
    for s in &m.slides {
        match extract_slide(&m, s, out_dir, cfg) {
            Ok(e) => {
                log::info!("{}: {} patches", s.slide_id, e.patches.len());
                out.slides.push(e);
            }
            Err(e) => {
                log::error!("{}: {e}", s.slide_id);
                failed += 1;
            }
        }
    }
    out.save(&out_dir.join(MANIFEST_FILE))?;
    let n: usize = out.slides.iter().map(|s| s.patches.len()).sum();
    println!("extracted {n} patches from {} slides", out.slides.len());
    if failed > 0 {
        return Err(CliError::PartialFailure { count: failed });
    }
    Ok(())
}
