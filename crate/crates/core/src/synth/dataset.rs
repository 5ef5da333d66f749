use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use super::{derive_seed, gen_synthetic_slide, DensityClass, SlideTruth, SynthSpec};
use crate::detect::{border_patches, ScoreConfig};
use crate::error::{Error, Result};
use crate::imaging::io::save_png;
use crate::imaging::{BinaryMask, Patch};
use crate::manifest::{DatasetManifest, PatchEntry, SlideDiagnosis, SlideEntry, Split};

pub const SLIDE_DIR: &str = "slides";
pub const PATCH_DIR: &str = "patches";
pub const TRUTH_DIR: &str = "truth";
pub const MANIFEST_FILE: &str = "manifest.json";

/// True for each patch whose window covers at least one blob pixel.
pub fn patch_labels(blob_mask: &BinaryMask, patches: &[Patch]) -> Vec<bool> {
    patches
        .iter()
        .map(|p| {
            let (ox, oy) = p.origin;
            (oy..oy + p.image.height()).any(|y| (ox..ox + p.image.width()).any(|x| blob_mask.get(x, y)))
        })
        .collect()
}

#[derive(Serialize)]
struct TruthFile<'a> {
    #[serde(flatten)]
    truth: &'a SlideTruth,
    patch_labels: Vec<(String, bool)>,
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

struct Job {
    index: u64,
    class: DensityClass,
    slide_id: String,
    split: Split,
}

fn jobs(spec: &SynthSpec) -> Vec<Job> {
    let mut out = Vec::new();
    let mut index = 0u64;
    for class in DensityClass::ALL {
        let n = spec.count(class);
        let n_train = (n as f64 * spec.train_fraction).round() as usize;
        for i in 0..n {
            out.push(Job {
                index,
                class,
                slide_id: format!("{}-{i:03}", class.name()),
                split: if i < n_train { Split::Train } else { Split::Test },
            });
            index += 1;
        }
    }
    out
}

fn build_slide(spec: &SynthSpec, job: &Job, out_dir: &Path, extract: &ScoreConfig) -> Result<SlideEntry> {
    let seed = derive_seed(spec.seed, job.index);
    let (img, mut truth) = gen_synthetic_slide(spec, seed, job.class)?;
    truth.slide_id = job.slide_id.clone();
    let image_path = PathBuf::from(SLIDE_DIR).join(format!("{}.png", job.slide_id));
    save_png(&img, &out_dir.join(&image_path))?;

    let patches = border_patches(&img, extract, &job.slide_id)?;
    let mask = truth.blob_mask.take().expect("generator returns the blob mask");
    let labels = patch_labels(&mask, &patches);
    let mut entries = Vec::with_capacity(patches.len());
    for (p, &label) in patches.iter().zip(&labels) {
        let rel = PathBuf::from(PATCH_DIR).join(&job.slide_id).join(p.file_name());
        save_png(&p.image, &out_dir.join(&rel))?;
        entries.push(PatchEntry {
            patch_path: rel,
            origin: p.origin,
            label: label.into(),
        });
    }
    let truth_file = TruthFile {
        truth: &truth,
        patch_labels: patches.iter().map(Patch::id).zip(labels).collect(),
    };
    write_json(&out_dir.join(TRUTH_DIR).join(format!("{}.json", job.slide_id)), &truth_file)?;

    Ok(SlideEntry {
        slide_id: job.slide_id.clone(),
        patient_id: None,
        image_path,
        diagnosis: if truth.positive() {
            SlideDiagnosis::Positive
        } else {
            SlideDiagnosis::Negative
        },
        split: job.split,
        patches: entries,
    })
}

/// Writes every slide, its border patches with blob-derived labels, the
/// per-slide ground truth and `manifest.json` under `out_dir`.
pub fn gen_dataset(spec: &SynthSpec, out_dir: &Path) -> Result<DatasetManifest> {
    spec.validate()?;
    for d in [SLIDE_DIR, PATCH_DIR, TRUTH_DIR] {
        let p = out_dir.join(d);
        std::fs::create_dir_all(&p).map_err(|e| Error::io(&p, e))?;
    }
    let extract = ScoreConfig::default();
    let slides = jobs(spec)
        .par_iter()
        .map(|job| build_slide(spec, job, out_dir, &extract))
        .collect::<Result<Vec<_>>>()?;
    let manifest = DatasetManifest {
        slides,
        ..DatasetManifest::new(out_dir)
    };
    manifest.save(&out_dir.join(MANIFEST_FILE))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn negative_only_dataset() {
        let dir = tempfile::tempdir().unwrap();
        let spec = SynthSpec {
            n_negative: 3,
            n_low: 0,
            n_high: 0,
            slide_size: 640,
            ..SynthSpec::default()
        };
        let m = gen_dataset(&spec, dir.path()).unwrap();
        assert_eq!(m.slides.len(), 3);
        assert!(m.slides.iter().all(|s| s.diagnosis == SlideDiagnosis::Negative));
        assert!(m.slides.iter().all(|s| !s.patches.is_empty()));
        let first = std::fs::read(dir.path().join(MANIFEST_FILE)).unwrap();
        DatasetManifest::load(&dir.path().join(MANIFEST_FILE)).unwrap();

        let again = tempfile::tempdir().unwrap();
        gen_dataset(&spec, again.path()).unwrap();
        assert_eq!(std::fs::read(again.path().join(MANIFEST_FILE)).unwrap(), first);
    }

    #[test]
    fn splits_follow_train_fraction() {
        let spec = SynthSpec {
            n_negative: 4,
            n_low: 3,
            n_high: 2,
            ..SynthSpec::default()
        };
        let js = jobs(&spec);
        let train = |c| js.iter().filter(|j| j.class == c && j.split == Split::Train).count();
        assert_eq!((train(DensityClass::Negative), train(DensityClass::Low), train(DensityClass::High)), (2, 2, 1));
        assert_eq!(js.iter().map(|j| j.index).collect::<Vec<_>>(), (0..9).collect::<Vec<_>>());
    }
}
