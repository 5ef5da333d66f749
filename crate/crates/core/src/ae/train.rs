use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{Adam, Optimizer};
use super::convert::images_to_tensor;
use super::model::AeModel;
use super::ops::{mse_loss, mse_loss_grad, Mode};
use crate::error::{Error, Result};
use crate::imaging::{Image, Patch};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub val_fraction: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 32,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            max_epochs: 100,
            patience: 5,
            val_fraction: 0.1,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidInput(m.into()));
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return bad("val_fraction must lie strictly between 0 and 1");
        }
        if self.patience > self.max_epochs {
            return bad("patience cannot exceed max_epochs");
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be at least 1");
        }
        if !(self.learning_rate > 0.0) || !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("learning rate must be positive and Adam betas in [0, 1)");
        }
        if !(self.epsilon > 0.0) {
            return bad("epsilon must be positive");
        }
        Ok(())
    }

    pub fn adam(&self) -> Adam {
        Adam {
            lr: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrainingLog {
    pub epochs: Vec<EpochRecord>,
    /// Epoch (1-based) whose weights were returned.
    pub best_epoch: usize,
    /// Training-set loss of the freshly initialized model.
    pub initial_train_loss: f64,
    pub n_train: usize,
    pub n_val: usize,
    pub stopped_early: bool,
}

impl TrainingLog {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,train_loss,val_loss,best\n");
        for r in &self.epochs {
            let best = u8::from(r.epoch == self.best_epoch);
            writeln!(s, "{},{},{},{best}", r.epoch, r.train_loss, r.val_loss).unwrap();
        }
        s
    }

    pub fn best(&self) -> Option<&EpochRecord> {
        self.epochs.iter().find(|r| r.epoch == self.best_epoch)
    }
}

pub fn train_autoencoder(patches: &[Patch], config: &TrainConfig) -> Result<(AeModel<f32>, TrainingLog)> {
    let images: Vec<&Image> = patches.iter().map(|p| &p.image).collect();
    train_on_images(&images, config)
}

/// Splits a shuffled index list into `(train, val)`.
fn split(n: usize, val_fraction: f64, rng: &mut ChaCha8Rng) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    if n == 1 {
        log::warn!("a single training sample; validating on the training set");
        return (idx.clone(), idx);
    }
    let n_val = ((n as f64 * val_fraction).round() as usize).clamp(1, n - 1);
    let val = idx.split_off(n - n_val);
    (idx, val)
}

fn mean_loss(model: &AeModel<f32>, images: &[&Image], idx: &[usize], batch: usize, mode: Mode) -> Result<f64> {
    let mut total = 0.0;
    for chunk in idx.chunks(batch) {
        let imgs: Vec<&Image> = chunk.iter().map(|&i| images[i]).collect();
        let x = images_to_tensor::<f32>(&imgs)?;
        let y = model.forward(&x, mode)?;
        total += mse_loss(&y, &x)? as f64 * chunk.len() as f64;
    }
    Ok(total / idx.len() as f64)
}

/// Trains on RGB images whose sides are multiples of four; the returned
/// model carries the weights of the best validation epoch.
pub fn train_on_images(images: &[&Image], config: &TrainConfig) -> Result<(AeModel<f32>, TrainingLog)> {
    config.validate()?;
    if images.is_empty() {
        return Err(Error::InvalidInput("no training patches".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = AeModel::<f32>::new(config.seed);
    let (mut train_idx, val_idx) = split(images.len(), config.val_fraction, &mut rng);
    let mut opt = Optimizer::new(model.net(), config.adam());

    let initial = mean_loss(&model, images, &train_idx, config.batch_size, Mode::Train)?;
    log::info!(
        "training on {} patches, validating on {}; initial loss {initial:.6}",
        train_idx.len(),
        val_idx.len()
    );

    let mut log = TrainingLog {
        epochs: Vec::new(),
        best_epoch: 0,
        initial_train_loss: initial,
        n_train: train_idx.len(),
        n_val: val_idx.len(),
        stopped_early: false,
    };
    let mut best: Option<(f64, AeModel<f32>)> = None;
    let mut stale = 0;
    for epoch in 1..=config.max_epochs {
        train_idx.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in train_idx.chunks(config.batch_size) {
            let imgs: Vec<&Image> = chunk.iter().map(|&i| images[i]).collect();
            let x = images_to_tensor::<f32>(&imgs)?;
            let tape = model.net().forward_train(&x)?;
            let loss = mse_loss(tape.output(), &x)?;
            if !loss.is_finite() {
                return Err(Error::Numeric(format!("loss became {loss} in epoch {epoch}")));
            }
            let dy = mse_loss_grad(tape.output(), &x)?;
            model.net_mut().commit_stats(&tape);
            let grads = model.net().backward(tape, &dy)?;
            opt.step(model.net_mut(), &grads);
            total += loss as f64 * chunk.len() as f64;
        }
        let train_loss = total / train_idx.len() as f64;
        let val_loss = mean_loss(&model, images, &val_idx, config.batch_size, Mode::Eval)?;
        log::info!("epoch {epoch}: train {train_loss:.6} val {val_loss:.6}");
        log.epochs.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
        });
        if best.as_ref().is_none_or(|(b, _)| val_loss < *b) {
            best = Some((val_loss, model.clone()));
            log.best_epoch = epoch;
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.patience {
                log.stopped_early = epoch < config.max_epochs;
                break;
            }
        }
    }
    let (_, best_model) = best.expect("at least one epoch ran");
    Ok((best_model, log))
}
