use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::ops::{self, BatchStats, ConvGeometry, Mode};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const KERNEL: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LayerKind {
    Conv,
    ConvTranspose,
    BatchNorm,
    LeakyRelu,
    Sigmoid,
}

/// Architecture descriptor for one layer.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    pub output_padding: usize,
    pub negative_slope: f64,
}

impl LayerSpec {
    fn base(kind: LayerKind, in_channels: usize, out_channels: usize) -> Self {
        LayerSpec {
            kind,
            in_channels,
            out_channels,
            kernel: 0,
            stride: 0,
            padding: 0,
            output_padding: 0,
            negative_slope: 0.0,
        }
    }

    /// 3×3 convolution with padding 1.
    pub fn conv(in_channels: usize, out_channels: usize, stride: usize) -> Self {
        LayerSpec {
            kernel: KERNEL,
            stride,
            padding: 1,
            ..Self::base(LayerKind::Conv, in_channels, out_channels)
        }
    }

    /// 3×3 transposed convolution that doubles the spatial extent.
    pub fn tconv(in_channels: usize, out_channels: usize) -> Self {
        LayerSpec {
            kernel: KERNEL,
            stride: 2,
            padding: 1,
            output_padding: 1,
            ..Self::base(LayerKind::ConvTranspose, in_channels, out_channels)
        }
    }

    pub fn batch_norm(channels: usize) -> Self {
        Self::base(LayerKind::BatchNorm, channels, channels)
    }

    pub fn leaky_relu(negative_slope: f64) -> Self {
        LayerSpec {
            negative_slope,
            ..Self::base(LayerKind::LeakyRelu, 0, 0)
        }
    }

    pub fn sigmoid() -> Self {
        Self::base(LayerKind::Sigmoid, 0, 0)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidShape(m));
        match self.kind {
            LayerKind::Conv | LayerKind::ConvTranspose => {
                if self.kernel != KERNEL {
                    return bad(format!("kernel {} (only {KERNEL} is supported)", self.kernel));
                }
                if !(1..=2).contains(&self.stride) {
                    return bad(format!("stride {} not in {{1, 2}}", self.stride));
                }
                if self.in_channels == 0 || self.out_channels == 0 {
                    return bad("zero channels".into());
                }
                if self.output_padding >= self.stride {
                    return bad("output padding must be below stride".into());
                }
            }
            LayerKind::BatchNorm if self.in_channels == 0 => return bad("zero channels".into()),
            LayerKind::LeakyRelu if !self.negative_slope.is_finite() => {
                return bad("non-finite slope".into())
            }
            _ => {}
        }
        Ok(())
    }

    fn geometry(&self) -> ConvGeometry {
        ConvGeometry {
            kernel: self.kernel,
            stride: self.stride,
            padding: self.padding,
        }
    }
}

#[derive(Clone, Debug)]
pub enum Layer<T> {
    Conv {
        weight: Tensor<T>,
        bias: Tensor<T>,
        geometry: ConvGeometry,
    },
    ConvTranspose {
        weight: Tensor<T>,
        bias: Tensor<T>,
        geometry: ConvGeometry,
        output_padding: usize,
    },
    BatchNorm {
        gamma: Tensor<T>,
        beta: Tensor<T>,
        running_mean: Tensor<T>,
        running_var: Tensor<T>,
    },
    LeakyRelu {
        slope: T,
    },
    Sigmoid,
}

fn kaiming<T: Scalar, R: Rng>(shape: &[usize], fan_in: usize, rng: &mut R) -> Tensor<T> {
    let std = (2.0 / fan_in as f64).sqrt();
    let normal = Normal::new(0.0, std).expect("finite std");
    let n = shape.iter().product();
    let data = (0..n)
        .map(|_| T::from_f64_lossy(normal.sample(rng)))
        .collect();
    Tensor::from_vec(shape, data).expect("shape matches")
}

impl<T: Scalar> Layer<T> {
    /// Fresh layer: Kaiming fan-in weights, zero biases, unit γ, identity
    /// running statistics.
    pub fn init<R: Rng>(spec: &LayerSpec, rng: &mut R) -> Result<Self> {
        spec.validate()?;
        let k = spec.kernel;
        Ok(match spec.kind {
            LayerKind::Conv => Layer::Conv {
                weight: kaiming(&[spec.out_channels, spec.in_channels, k, k], spec.in_channels * k * k, rng),
                bias: Tensor::zeros(&[spec.out_channels]),
                geometry: spec.geometry(),
            },
            LayerKind::ConvTranspose => Layer::ConvTranspose {
                weight: kaiming(&[spec.in_channels, spec.out_channels, k, k], spec.out_channels * k * k, rng),
                bias: Tensor::zeros(&[spec.out_channels]),
                geometry: spec.geometry(),
                output_padding: spec.output_padding,
            },
            LayerKind::BatchNorm => Layer::BatchNorm {
                gamma: Tensor::full(&[spec.in_channels], T::one()),
                beta: Tensor::zeros(&[spec.in_channels]),
                running_mean: Tensor::zeros(&[spec.in_channels]),
                running_var: Tensor::full(&[spec.in_channels], T::one()),
            },
            LayerKind::LeakyRelu => Layer::LeakyRelu {
                slope: T::from_f64_lossy(spec.negative_slope),
            },
            LayerKind::Sigmoid => Layer::Sigmoid,
        })
    }

    pub fn spec(&self) -> LayerSpec {
        match self {
            Layer::Conv { weight, geometry, .. } => LayerSpec {
                stride: geometry.stride,
                padding: geometry.padding,
                kernel: geometry.kernel,
                ..LayerSpec::base(LayerKind::Conv, weight.shape()[1], weight.shape()[0])
            },
            Layer::ConvTranspose {
                weight,
                geometry,
                output_padding,
                ..
            } => LayerSpec {
                stride: geometry.stride,
                padding: geometry.padding,
                kernel: geometry.kernel,
                output_padding: *output_padding,
                ..LayerSpec::base(LayerKind::ConvTranspose, weight.shape()[0], weight.shape()[1])
            },
            Layer::BatchNorm { gamma, .. } => LayerSpec::batch_norm(gamma.len()),
            Layer::LeakyRelu { slope } => LayerSpec::leaky_relu(slope.as_f64()),
            Layer::Sigmoid => LayerSpec::sigmoid(),
        }
    }

    pub fn kind(&self) -> LayerKind {
        match self {
            Layer::Conv { .. } => LayerKind::Conv,
            Layer::ConvTranspose { .. } => LayerKind::ConvTranspose,
            Layer::BatchNorm { .. } => LayerKind::BatchNorm,
            Layer::LeakyRelu { .. } => LayerKind::LeakyRelu,
            Layer::Sigmoid => LayerKind::Sigmoid,
        }
    }

    /// Trainable tensors in declaration order.
    pub fn params(&self) -> Vec<&Tensor<T>> {
        match self {
            Layer::Conv { weight, bias, .. } | Layer::ConvTranspose { weight, bias, .. } => vec![weight, bias],
            Layer::BatchNorm { gamma, beta, .. } => vec![gamma, beta],
            _ => Vec::new(),
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        match self {
            Layer::Conv { weight, bias, .. } | Layer::ConvTranspose { weight, bias, .. } => vec![weight, bias],
            Layer::BatchNorm { gamma, beta, .. } => vec![gamma, beta],
            _ => Vec::new(),
        }
    }

    pub fn param_names(&self) -> &'static [&'static str] {
        match self {
            Layer::Conv { .. } | Layer::ConvTranspose { .. } => &["weight", "bias"],
            Layer::BatchNorm { .. } => &["gamma", "beta"],
            _ => &[],
        }
    }

    pub fn forward(&self, x: &Tensor<T>, mode: Mode) -> Result<(Tensor<T>, Option<BatchStats<T>>)> {
        Ok(match self {
            Layer::Conv { weight, bias, geometry } => (ops::conv2d(x, weight, bias, *geometry)?, None),
            Layer::ConvTranspose {
                weight,
                bias,
                geometry,
                output_padding,
            } => (
                ops::transposed_conv2d(x, weight, bias, *geometry, *output_padding)?,
                None,
            ),
            Layer::BatchNorm {
                gamma,
                beta,
                running_mean,
                running_var,
            } => ops::batch_norm(x, gamma, beta, mode, (running_mean, running_var))?,
            Layer::LeakyRelu { slope } => (ops::leaky_relu(x, *slope), None),
            Layer::Sigmoid => (ops::sigmoid(x), None),
        })
    }

    /// Gradient with respect to the input and to each of [`Layer::params`].
    /// Batch norm needs the statistics its training-mode forward returned.
    pub fn backward(
        &self,
        x: &Tensor<T>,
        y: &Tensor<T>,
        stats: Option<&BatchStats<T>>,
        dy: &Tensor<T>,
    ) -> Result<(Tensor<T>, Vec<Tensor<T>>)> {
        Ok(match self {
            Layer::Conv { weight, geometry, .. } => {
                let g = ops::conv2d_backward(x, weight, dy, *geometry)?;
                (g.input, vec![g.weight, g.bias])
            }
            Layer::ConvTranspose { weight, geometry, .. } => {
                let g = ops::transposed_conv2d_backward(x, weight, dy, *geometry)?;
                (g.input, vec![g.weight, g.bias])
            }
            Layer::BatchNorm { gamma, .. } => {
                let stats = stats.ok_or_else(|| {
                    Error::Numeric("batch norm backward requires training-mode statistics".into())
                })?;
                let g = ops::batch_norm_backward(x, gamma, stats, dy)?;
                (g.input, vec![g.gamma, g.beta])
            }
            Layer::LeakyRelu { slope } => (ops::leaky_relu_backward(x, *slope, dy), Vec::new()),
            Layer::Sigmoid => (ops::sigmoid_backward(y, dy), Vec::new()),
        })
    }

    pub fn commit_stats(&mut self, stats: &BatchStats<T>) {
        if let Layer::BatchNorm {
            running_mean,
            running_var,
            ..
        } = self
        {
            ops::update_running_stats(stats, running_mean, running_var);
        }
    }

    pub fn cast<U: Scalar>(&self) -> Layer<U> {
        match self {
            Layer::Conv { weight, bias, geometry } => Layer::Conv {
                weight: weight.cast(),
                bias: bias.cast(),
                geometry: *geometry,
            },
            Layer::ConvTranspose {
                weight,
                bias,
                geometry,
                output_padding,
            } => Layer::ConvTranspose {
                weight: weight.cast(),
                bias: bias.cast(),
                geometry: *geometry,
                output_padding: *output_padding,
            },
            Layer::BatchNorm {
                gamma,
                beta,
                running_mean,
                running_var,
            } => Layer::BatchNorm {
                gamma: gamma.cast(),
                beta: beta.cast(),
                running_mean: running_mean.cast(),
                running_var: running_var.cast(),
            },
            Layer::LeakyRelu { slope } => Layer::LeakyRelu {
                slope: U::from_f64_lossy(slope.as_f64()),
            },
            Layer::Sigmoid => Layer::Sigmoid,
        }
    }
}
