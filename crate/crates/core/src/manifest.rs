//! JSON dataset manifest: slides, their diagnoses and annotated patches.
//!
//! Paths are stored relative to the manifest file and resolved against its
//! directory on load.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SlideDiagnosis {
    Positive,
    Negative,
    #[default]
    Unknown,
}

impl SlideDiagnosis {
    pub fn as_bool(self) -> Option<bool> {
        match self {
            SlideDiagnosis::Positive => Some(true),
            SlideDiagnosis::Negative => Some(false),
            SlideDiagnosis::Unknown => None,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
    #[default]
    Unassigned,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PatchLabel {
    Positive,
    Negative,
    #[default]
    Unlabeled,
}

impl PatchLabel {
    pub fn as_bool(self) -> Option<bool> {
        match self {
            PatchLabel::Positive => Some(true),
            PatchLabel::Negative => Some(false),
            PatchLabel::Unlabeled => None,
        }
    }
}

impl From<bool> for PatchLabel {
    fn from(positive: bool) -> Self {
        if positive {
            PatchLabel::Positive
        } else {
            PatchLabel::Negative
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatchEntry {
    pub patch_path: PathBuf,
    pub origin: (usize, usize),
    #[serde(default)]
    pub label: PatchLabel,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlideEntry {
    pub slide_id: String,
    /// Defaults to `slide_id`; slides sharing it are kept in one fold.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub patient_id: Option<String>,
    pub image_path: PathBuf,
    #[serde(default)]
    pub diagnosis: SlideDiagnosis,
    #[serde(default)]
    pub split: Split,
    #[serde(default)]
    pub patches: Vec<PatchEntry>,
}

impl SlideEntry {
    pub fn patient(&self) -> &str {
        self.patient_id.as_deref().unwrap_or(&self.slide_id)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub version: u32,
    pub slides: Vec<SlideEntry>,
    /// Directory relative paths resolve against. Not serialized.
    #[serde(skip)]
    pub root: PathBuf,
}

impl Default for DatasetManifest {
    fn default() -> Self {
        DatasetManifest {
            version: MANIFEST_VERSION,
            slides: Vec::new(),
            root: PathBuf::new(),
        }
    }
}

impl DatasetManifest {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        DatasetManifest {
            root: root.into(),
            ..Default::default()
        }
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.root.join(p)
        }
    }

    /// Parses without touching the file system beyond the manifest itself.
    pub fn from_json(text: &str, root: impl Into<PathBuf>, origin: &Path) -> Result<Self> {
        let mut m: DatasetManifest = serde_json::from_str(text).map_err(|source| Error::Json {
            path: origin.to_path_buf(),
            source,
        })?;
        m.root = root.into();
        Ok(m)
    }

    /// Reads and validates a manifest.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let m = Self::from_json(&text, root, path)?;
        m.validate()?;
        Ok(m)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    /// Version, unique slide ids, and existence of every referenced file.
    pub fn validate(&self) -> Result<()> {
        if self.version != MANIFEST_VERSION {
            return Err(Error::InvalidInput(format!(
                "unsupported manifest version {} (expected {MANIFEST_VERSION})",
                self.version
            )));
        }
        let mut seen = HashSet::new();
        for s in &self.slides {
            if !seen.insert(s.slide_id.as_str()) {
                return Err(Error::InvalidInput(format!("duplicate slide_id `{}`", s.slide_id)));
            }
            let img = self.resolve(&s.image_path);
            if !img.is_file() {
                return Err(Error::InvalidInput(format!(
                    "slide `{}`: image {} does not exist",
                    s.slide_id,
                    img.display()
                )));
            }
            for p in &s.patches {
                let pp = self.resolve(&p.patch_path);
                if !pp.is_file() {
                    return Err(Error::InvalidInput(format!(
                        "slide `{}`: patch {} does not exist",
                        s.slide_id,
                        pp.display()
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn slide(&self, id: &str) -> Option<&SlideEntry> {
        self.slides.iter().find(|s| s.slide_id == id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn touch(dir: &Path, name: &str) {
        std::fs::create_dir_all(dir.join(name).parent().unwrap()).unwrap();
        std::fs::write(dir.join(name), b"x").unwrap();
    }

    fn entry(id: &str, path: &str) -> SlideEntry {
        SlideEntry {
            slide_id: id.into(),
            patient_id: None,
            image_path: path.into(),
            diagnosis: SlideDiagnosis::Negative,
            split: Split::Train,
            patches: vec![],
        }
    }

    #[test]
    fn round_trip_and_validation() {
        let dir = tempfile::tempdir().unwrap();
        touch(dir.path(), "slides/a.png");
        touch(dir.path(), "patches/a_0_0.png");
        let mut m = DatasetManifest::new(dir.path());
        let mut a = entry("a", "slides/a.png");
        a.patches.push(PatchEntry {
            patch_path: "patches/a_0_0.png".into(),
            origin: (0, 0),
            label: PatchLabel::Positive,
        });
        m.slides.push(a);
        let path = dir.path().join("manifest.json");
        m.save(&path).unwrap();
        let back = DatasetManifest::load(&path).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.slides[0].patient(), "a");

        m.slides.push(entry("a", "slides/a.png"));
        assert!(m.validate().unwrap_err().to_string().contains("duplicate"));
        m.slides[1] = entry("b", "slides/missing.png");
        assert!(m.validate().unwrap_err().to_string().contains("missing.png"));
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = r#"{"version":1,"slides":[],"extra":3}"#;
        assert!(DatasetManifest::from_json(text, ".", Path::new("m.json")).is_err());
        let text = r#"{"version":1,"slides":[{"slide_id":"a","image_path":"a.png"}]}"#;
        let m = DatasetManifest::from_json(text, ".", Path::new("m.json")).unwrap();
        assert_eq!(m.slides[0].diagnosis, SlideDiagnosis::Unknown);
        assert_eq!(m.slides[0].split, Split::Unassigned);
        let bad = r#"{"version":2,"slides":[]}"#;
        assert!(DatasetManifest::from_json(bad, ".", Path::new("m.json")).unwrap().validate().is_err());
    }
}
