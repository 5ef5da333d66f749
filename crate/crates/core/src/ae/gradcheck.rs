//! Central finite-difference check of analytic gradients.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::layer::Layer;
use super::model::{AeModel, Sequential};
use super::ops::{mse_loss, mse_loss_grad, Mode};
use super::tensor::Tensor;
use crate::error::Result;

/// How probes near leaky-ReLU kinks are handled.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum KinkPolicy {
    /// Evaluate the true network and discard probes that flip the sign of
    /// any leaky-ReLU input, where the difference quotient does not
    /// estimate the derivative.
    Skip,
    /// Hold every leaky-ReLU on its branch from the unperturbed pass. The
    /// loss is then smooth along each probe and every coordinate counts.
    Freeze,
}

#[derive(Clone, Debug)]
pub struct GradCheckOptions {
    pub step: f64,
    /// Probes per parameter block; smaller blocks are checked in full.
    pub max_entries: usize,
    /// Denominator floor so entries whose gradients are both ~0 compare absolutely.
    pub floor: f64,
    pub check_input: bool,
    pub kinks: KinkPolicy,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions {
            step: 1e-3,
            max_entries: 24,
            floor: 1e-8,
            check_input: true,
            kinks: KinkPolicy::Freeze,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BlockCheck {
    pub name: String,
    pub checked: usize,
    pub skipped_kinks: usize,
    pub max_rel_error: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GradCheckReport {
    pub blocks: Vec<BlockCheck>,
    pub max_rel_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Training-mode loss plus the sign pattern of every leaky-ReLU input.
/// With `frozen`, leaky-ReLUs follow that pattern instead of their input.
fn probe(net: &Sequential<f64>, x: &Tensor<f64>, target: &Tensor<f64>, frozen: Option<&[bool]>) -> Result<(f64, Vec<bool>)> {
    let mut signs = Vec::new();
    let mut cur = x.clone();
    for layer in net.layers() {
        if let Layer::LeakyRelu { slope } = layer {
            let start = signs.len();
            signs.extend(cur.data().iter().map(|&v| v >= 0.0));
            let pattern = match frozen {
                Some(f) => &f[start..signs.len()],
                None => &signs[start..],
            };
            for (v, &up) in cur.data_mut().iter_mut().zip(pattern) {
                if !up {
                    *v *= *slope;
                }
            }
        } else {
            cur = layer.forward(&cur, Mode::Train)?.0;
        }
    }
    Ok((mse_loss(&cur, target)?, signs))
}

struct Prober<'a> {
    x: &'a Tensor<f64>,
    target: &'a Tensor<f64>,
    signs: Vec<bool>,
    policy: KinkPolicy,
    h: f64,
}

impl Prober<'_> {
    fn eval(&self, net: &Sequential<f64>, x: &Tensor<f64>) -> Result<(f64, bool)> {
        let frozen = (self.policy == KinkPolicy::Freeze).then_some(self.signs.as_slice());
        let (loss, signs) = probe(net, x, self.target, frozen)?;
        Ok((loss, self.policy == KinkPolicy::Freeze || signs == self.signs))
    }

    /// Central difference of a coordinate set by `set`, or `None` when the
    /// probe crosses a kink.
    fn difference(&self, orig: f64, mut set: impl FnMut(f64) -> Result<(f64, bool)>) -> Result<Option<f64>> {
        let (plus, ok_p) = set(orig + self.h)?;
        let (minus, ok_m) = set(orig - self.h)?;
        set(orig)?;
        Ok((ok_p && ok_m).then(|| (plus - minus) / (2.0 * self.h)))
    }
}

/// Visits the coordinates of a block in random order until `max_entries`
/// valid probes were taken.
fn check_block(
    name: String,
    len: usize,
    opts: &GradCheckOptions,
    rng: &mut ChaCha8Rng,
    mut numeric: impl FnMut(usize) -> Result<Option<f64>>,
    analytic: impl Fn(usize) -> f64,
) -> Result<BlockCheck> {
    let mut block = BlockCheck {
        name,
        checked: 0,
        skipped_kinks: 0,
        max_rel_error: 0.0,
    };
    for e in sample(rng, len, len).into_vec() {
        if block.checked == opts.max_entries {
            break;
        }
        match numeric(e)? {
            Some(n) => {
                block.max_rel_error = block.max_rel_error.max(relative_error(analytic(e), n, opts.floor));
                block.checked += 1;
            }
            None => block.skipped_kinks += 1,
        }
    }
    Ok(block)
}

/// Compares backpropagated gradients of `mse(net(x), target)` (batch
/// norm in training mode) with central differences, for every parameter
/// block and optionally the input.
pub fn check_gradients(
    net: &Sequential<f64>,
    x: &Tensor<f64>,
    target: &Tensor<f64>,
    tolerance: f64,
    opts: &GradCheckOptions,
) -> Result<GradCheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let tape = net.forward_train(x)?;
    let dy = mse_loss_grad(tape.output(), target)?;
    let grads = net.backward(tape, &dy)?;
    let prober = Prober {
        x,
        target,
        signs: probe(net, x, target, None)?.1,
        policy: opts.kinks,
        h: opts.step,
    };
    let mut blocks = Vec::new();

    let mut work = net.clone();
    for (li, layer) in net.layers().iter().enumerate() {
        for (pi, name) in layer.param_names().iter().enumerate() {
            let values = layer.params()[pi].data();
            blocks.push(check_block(
                format!("layer{li}.{:?}.{name}", layer.kind()),
                values.len(),
                opts,
                &mut rng,
                |e| {
                    prober.difference(values[e], |v| {
                        work.layers_mut()[li].params_mut()[pi].data_mut()[e] = v;
                        prober.eval(&work, prober.x)
                    })
                },
                |e| grads.layers[li][pi].data()[e],
            )?);
        }
    }

    if opts.check_input {
        let mut xp = x.clone();
        blocks.push(check_block(
            "input".into(),
            x.len(),
            opts,
            &mut rng,
            |e| {
                prober.difference(x.data()[e], |v| {
                    xp.data_mut()[e] = v;
                    prober.eval(net, &xp)
                })
            },
            |e| grads.input.data()[e],
        )?);
    }

    let max_rel_error = blocks.iter().map(|b| b.max_rel_error).fold(0.0, f64::max);
    let covered = blocks.iter().all(|b| b.checked > 0);
    Ok(GradCheckReport {
        blocks,
        max_rel_error,
        tolerance,
        passed: covered && max_rel_error < tolerance,
    })
}

/// Reconstruction-loss gradient check of the whole autoencoder on `batch`.
pub fn gradient_check(model: &AeModel<f64>, batch: &Tensor<f64>, tolerance: f64) -> Result<GradCheckReport> {
    check_gradients(model.net(), batch, batch, tolerance, &GradCheckOptions::default())
}
