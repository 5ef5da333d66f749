use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::layer::{Layer, LayerKind, LayerSpec};
use super::ops::{BatchStats, Mode};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::imaging::PATCH_SIZE;
use crate::scalar::Scalar;

pub const LEAKY_SLOPE: f64 = 0.01;
pub const INPUT_CHANNELS: usize = 3;
pub const ENCODER_CHANNELS: [usize; 3] = [32, 64, 64];
pub const ENCODER_STRIDES: [usize; 3] = [1, 2, 2];
pub const DECODER_CHANNELS: [usize; 2] = [64, 32];

/// Layer list of the autoencoder: three conv/BN/LReLU encoder blocks,
/// two upsampling tconv/BN/LReLU blocks, then a conv back to RGB and a
/// sigmoid.
pub fn architecture() -> Vec<LayerSpec> {
    let mut specs = Vec::new();
    let mut ch = INPUT_CHANNELS;
    for (&out, &stride) in ENCODER_CHANNELS.iter().zip(&ENCODER_STRIDES) {
        specs.push(LayerSpec::conv(ch, out, stride));
        specs.push(LayerSpec::batch_norm(out));
        specs.push(LayerSpec::leaky_relu(LEAKY_SLOPE));
        ch = out;
    }
    for &out in &DECODER_CHANNELS {
        specs.push(LayerSpec::tconv(ch, out));
        specs.push(LayerSpec::batch_norm(out));
        specs.push(LayerSpec::leaky_relu(LEAKY_SLOPE));
        ch = out;
    }
    specs.push(LayerSpec::conv(ch, INPUT_CHANNELS, 1));
    specs.push(LayerSpec::sigmoid());
    specs
}

/// Activations and batch statistics recorded by a training-mode forward.
pub struct Tape<T> {
    /// `acts[0]` is the input, `acts[i + 1]` the output of layer `i`.
    acts: Vec<Tensor<T>>,
    stats: Vec<Option<BatchStats<T>>>,
}

impl<T: Scalar> Tape<T> {
    pub fn output(&self) -> &Tensor<T> {
        self.acts.last().expect("tape holds the input")
    }

    pub fn stats(&self) -> &[Option<BatchStats<T>>] {
        &self.stats
    }

    /// Input of layer `i`.
    pub fn activation(&self, i: usize) -> &Tensor<T> {
        &self.acts[i]
    }
}

pub struct Gradients<T> {
    /// One entry per layer, aligned with [`Layer::params`].
    pub layers: Vec<Vec<Tensor<T>>>,
    pub input: Tensor<T>,
}

/// Plain feed-forward stack of layers.
#[derive(Clone, Debug)]
pub struct Sequential<T> {
    layers: Vec<Layer<T>>,
}

impl<T: Scalar> Sequential<T> {
    pub fn new(layers: Vec<Layer<T>>) -> Self {
        Sequential { layers }
    }

    pub fn from_specs(specs: &[LayerSpec], seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = specs
            .iter()
            .map(|s| Layer::init(s, &mut rng))
            .collect::<Result<_>>()?;
        Ok(Sequential { layers })
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer<T>] {
        &mut self.layers
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(Layer::spec).collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .flat_map(|l| l.params())
            .map(Tensor::len)
            .sum()
    }

    /// Forward pass without recording. Training mode normalizes with batch
    /// statistics but leaves the running statistics untouched.
    pub fn forward(&self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        let mut cur = None::<Tensor<T>>;
        for layer in &self.layers {
            let (y, _) = layer.forward(cur.as_ref().unwrap_or(x), mode)?;
            cur = Some(y);
        }
        Ok(cur.unwrap_or_else(|| x.clone()))
    }

    pub fn forward_train(&self, x: &Tensor<T>) -> Result<Tape<T>> {
        let mut acts = vec![x.clone()];
        let mut stats = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let (y, s) = layer.forward(acts.last().unwrap(), Mode::Train)?;
            acts.push(y);
            stats.push(s);
        }
        Ok(Tape { acts, stats })
    }

    /// Backpropagates `grad_out` through a recorded pass, releasing
    /// activations as it goes.
    pub fn backward(&self, mut tape: Tape<T>, grad_out: &Tensor<T>) -> Result<Gradients<T>> {
        if grad_out.shape() != tape.output().shape() {
            return Err(Error::InvalidShape(format!(
                "gradient {:?} for output {:?}",
                grad_out.shape(),
                tape.output().shape()
            )));
        }
        let mut grads = vec![Vec::new(); self.layers.len()];
        let mut dy = grad_out.clone();
        for i in (0..self.layers.len()).rev() {
            let y = tape.acts.pop().expect("one activation per layer");
            let x = tape.acts.last().expect("input retained");
            let (dx, g) = self.layers[i].backward(x, &y, tape.stats[i].as_ref(), &dy)?;
            grads[i] = g;
            dy = dx;
        }
        Ok(Gradients {
            layers: grads,
            input: dy,
        })
    }

    /// Folds the batch statistics of a recorded pass into the running
    /// statistics.
    pub fn commit_stats(&mut self, tape: &Tape<T>) {
        for (layer, s) in self.layers.iter_mut().zip(&tape.stats) {
            if let Some(s) = s {
                layer.commit_stats(s);
            }
        }
    }

    pub fn cast<U: Scalar>(&self) -> Sequential<U> {
        Sequential {
            layers: self.layers.iter().map(Layer::cast).collect(),
        }
    }
}

/// The convolutional autoencoder.
#[derive(Clone, Debug)]
pub struct AeModel<T> {
    net: Sequential<T>,
}

impl<T: Scalar> AeModel<T> {
    pub fn new(seed: u64) -> Self {
        let net = Sequential::from_specs(&architecture(), seed).expect("fixed architecture is valid");
        Self::from_net(net).expect("fixed architecture is valid")
    }

    /// Wraps a network after checking that it has the autoencoder layout.
    pub fn from_net(net: Sequential<T>) -> Result<Self> {
        let want = architecture();
        let got = net.specs();
        if got.len() != want.len() {
            return Err(Error::InvalidShape(format!(
                "{} layers, expected {}",
                got.len(),
                want.len()
            )));
        }
        for (i, (g, w)) in got.iter().zip(&want).enumerate() {
            let same = match w.kind {
                LayerKind::LeakyRelu => g.kind == w.kind && g.negative_slope.is_finite(),
                _ => g == w,
            };
            if !same {
                return Err(Error::InvalidShape(format!("layer {i} is {g:?}, expected {w:?}")));
            }
        }
        let latent = ENCODER_CHANNELS[2] * (PATCH_SIZE / 4) * (PATCH_SIZE / 4);
        assert!(
            latent > INPUT_CHANNELS * PATCH_SIZE * PATCH_SIZE,
            "latent map must be larger than the input"
        );
        Ok(AeModel { net })
    }

    pub fn net(&self) -> &Sequential<T> {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut Sequential<T> {
        &mut self.net
    }

    pub fn into_net(self) -> Sequential<T> {
        self.net
    }

    /// Any `(N, 3, H, W)` batch with `H` and `W` multiples of four.
    pub fn forward(&self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        self.check_input(x)?;
        self.net.forward(x, mode)
    }

    /// Latent map produced by the encoder (eval mode).
    pub fn encode(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.check_input(x)?;
        Sequential::new(self.net.layers[..9].to_vec()).forward(x, Mode::Eval)
    }

    /// Eval-mode reconstruction of `(N, 3, 256, 256)` patches.
    pub fn reconstruct(&self, batch: &Tensor<T>) -> Result<Tensor<T>> {
        let (_, c, h, w) = batch.dims4()?;
        if c != INPUT_CHANNELS || h != PATCH_SIZE || w != PATCH_SIZE {
            return Err(Error::InvalidShape(format!(
                "reconstruct expects (N, 3, {PATCH_SIZE}, {PATCH_SIZE}), got {:?}",
                batch.shape()
            )));
        }
        self.net.forward(batch, Mode::Eval)
    }

    fn check_input(&self, x: &Tensor<T>) -> Result<()> {
        let (_, c, h, w) = x.dims4()?;
        if c != INPUT_CHANNELS || h % 4 != 0 || w % 4 != 0 {
            return Err(Error::InvalidShape(format!(
                "autoencoder input must be (N, 3, 4a, 4b), got {:?}",
                x.shape()
            )));
        }
        Ok(())
    }

    pub fn cast<U: Scalar>(&self) -> AeModel<U> {
        AeModel {
            net: self.net.cast(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes_through_the_network() {
        let m = AeModel::<f32>::new(1);
        let x = Tensor::full(&[2, 3, 32, 32], 0.5);
        let z = m.encode(&x).unwrap();
        assert_eq!(z.shape(), &[2, 64, 8, 8]);
        let y = m.forward(&x, Mode::Eval).unwrap();
        assert_eq!(y.shape(), x.shape());
        assert!(y.data().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn reconstruct_shape_and_sanity() {
        let m = AeModel::<f32>::new(3);
        for n in [1, 4] {
            let x = Tensor::full(&[n, 3, 256, 256], 0.25);
            let y = m.reconstruct(&x).unwrap();
            assert_eq!(y.shape(), x.shape());
            assert!(y.data().iter().all(|v| v.is_finite()));
        }
        let bad = Tensor::zeros(&[1, 3, 128, 128]);
        assert!(matches!(m.reconstruct(&bad), Err(Error::InvalidShape(_))));
    }

    #[test]
    fn latent_map_of_a_patch() {
        let m = AeModel::<f32>::new(0);
        let z = m.encode(&Tensor::zeros(&[1, 3, 256, 256])).unwrap();
        assert_eq!(z.shape(), &[1, 64, 64, 64]);
        assert!(z.len() > 3 * 256 * 256);
    }

    #[test]
    fn init_is_seeded() {
        let a = AeModel::<f32>::new(5);
        let b = AeModel::<f32>::new(5);
        let c = AeModel::<f32>::new(6);
        let w = |m: &AeModel<f32>| m.net().layers()[0].params()[0].clone();
        assert_eq!(w(&a), w(&b));
        assert_ne!(w(&a), w(&c));
    }

    #[test]
    fn rejects_foreign_layouts() {
        let net = Sequential::<f32>::from_specs(&[LayerSpec::conv(3, 8, 1)], 0).unwrap();
        assert!(AeModel::from_net(net).is_err());
        assert!(LayerSpec { stride: 3, ..LayerSpec::conv(3, 8, 1) }.validate().is_err());
        assert!(LayerSpec { kernel: 5, ..LayerSpec::conv(3, 8, 1) }.validate().is_err());
    }
}
