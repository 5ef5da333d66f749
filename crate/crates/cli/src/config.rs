//! Run configuration: built-in defaults, then a TOML file, then `--set`
//! overrides, then dedicated flags.

use std::path::Path;

use serde::{Deserialize, Serialize};
use stainscope::ae::TrainConfig;
use stainscope::detect::{BrownBand, ScoreConfig, DEFAULT_EPSILON};
use stainscope::imaging::{TissueParams, DEFAULT_STRIDE};
use stainscope::synth::SynthSpec;
use toml::{Table, Value};

use crate::error::{CliError, CliResult};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Seeds training, cropping, fold assignment and synthesis.
    pub seed: u64,
    /// Cross-validation folds.
    pub k: usize,
    /// Random border windows per healthy training slide.
    pub crops_per_slide: usize,
    /// Additive smoothing in the F_brown ratio.
    pub epsilon: f64,
    pub stride: usize,
    /// Structuring-element radius of the border gradient.
    pub se_radius: usize,
    /// Patches per reconstruction pass while scoring.
    pub score_batch_size: usize,
    /// Diagonal loading for color transfer.
    pub lambda: f64,
    /// Also write `roc.svg` from `crossval`.
    pub svg: bool,
    pub band: BrownBand,
    pub tissue: TissueParams,
    /// `seed` is taken from the top level.
    pub train: TrainConfig,
    /// `seed` is taken from the top level.
    pub synth: SynthSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            k: 10,
            crops_per_slide: 50,
            epsilon: DEFAULT_EPSILON,
            stride: DEFAULT_STRIDE,
            se_radius: 1,
            score_batch_size: 8,
            lambda: 1e-6,
            svg: false,
            band: BrownBand::default(),
            tissue: TissueParams::default(),
            train: TrainConfig::default(),
            synth: SynthSpec::default(),
        }
    }
}

impl RunConfig {
    pub fn score_config(&self) -> ScoreConfig {
        ScoreConfig {
            band: self.band,
            epsilon: self.epsilon,
            stride: self.stride,
            se_radius: self.se_radius,
            tissue: self.tissue,
            batch_size: self.score_batch_size,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: self.seed,
            ..self.train.clone()
        }
    }

    pub fn synth_spec(&self) -> SynthSpec {
        SynthSpec {
            seed: self.seed,
            ..self.synth.clone()
        }
    }

    pub fn to_toml(&self) -> String {
        let mut v = Value::try_from(self).expect("config serializes");
        for section in ["train", "synth"] {
            if let Some(t) = v.get_mut(section).and_then(Value::as_table_mut) {
                t.remove("seed");
            }
        }
        toml::to_string_pretty(&v).expect("config serializes")
    }

    /// Layers `file` and `sets` (each `dotted.key=value`) over the defaults.
    pub fn load(file: Option<&Path>, sets: &[String]) -> CliResult<Self> {
        let mut table = match file {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
                text.parse::<Table>()
                    .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
            }
            None => Table::new(),
        };
        for s in sets {
            apply_set(&mut table, s)?;
        }
        for section in ["train", "synth"] {
            if table.get(section).and_then(|t| t.get("seed")).is_some() {
                return Err(CliError::Config(format!(
                    "`{section}.seed` is not a key; use the top-level `seed`"
                )));
            }
        }
        let cfg: RunConfig = Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: &str| Err(CliError::Config(m.to_owned()));
        if self.k < 2 {
            return bad("k must be at least 2");
        }
        if self.crops_per_slide == 0 {
            return bad("crops_per_slide must be at least 1");
        }
        if !(self.epsilon > 0.0) {
            return bad("epsilon must be > 0");
        }
        if self.stride == 0 || self.score_batch_size == 0 {
            return bad("stride and score_batch_size must be at least 1");
        }
        if !(self.lambda >= 0.0) {
            return bad("lambda must be >= 0");
        }
        self.train_config().validate()?;
        self.synth_spec().validate()?;
        Ok(())
    }
}

/// `a.b.c=value`; the value is parsed as TOML, falling back to a string.
fn apply_set(table: &mut Table, assignment: &str) -> CliResult<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("--set expects key=value, got `{assignment}`")))?;
    let path: Vec<&str> = key.trim().split('.').collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(CliError::Usage(format!("bad key `{key}`")));
    }
    let value = format!("v = {}", raw.trim())
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.trim().to_owned()));
    let (last, parents) = path.split_last().unwrap();
    let mut cur = table;
    for p in parents {
        cur = cur
            .entry(p.to_string())
            .or_insert_with(|| Value::Table(Table::new()))
            .as_table_mut()
            .ok_or_else(|| CliError::Usage(format!("`{p}` in `{key}` is not a table")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let d = RunConfig::default();
        let text = d.to_toml();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.toml");
        std::fs::write(&p, &text).unwrap();
        assert_eq!(RunConfig::load(Some(&p), &[]).unwrap(), d);
    }

    #[test]
    fn precedence() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.toml");
        std::fs::write(&p, "k = 4\n[band]\nsat_min = 0.2\n[train]\nmax_epochs = 3\npatience = 2\n").unwrap();
        let c = RunConfig::load(Some(&p), &["k=6".into(), "train.batch_size=8".into()]).unwrap();
        assert_eq!(c.k, 6);
        assert_eq!(c.band.sat_min, 0.2);
        assert_eq!(c.band.lo, -20.0);
        assert_eq!((c.train.max_epochs, c.train.batch_size), (3, 8));
    }

    #[test]
    fn rejects_unknown_and_seed_keys() {
        assert!(RunConfig::load(None, &["bogus=1".into()]).is_err());
        assert!(RunConfig::load(None, &["band.width=1".into()]).is_err());
        assert!(RunConfig::load(None, &["train.seed=3".into()]).is_err());
        assert!(RunConfig::load(None, &["k".into()]).is_err());
        assert!(RunConfig::load(None, &["k=1".into()]).is_err());
    }
}
