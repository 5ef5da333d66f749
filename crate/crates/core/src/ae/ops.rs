//! Forward and backward kernels for the layers of the autoencoder.
//!
//! Convolutions lower to im2col + GEMM one sample at a time. Samples run
//! in parallel; every cross-sample reduction (weight gradients, batch
//! statistics) is summed in sample order, so results do not depend on the
//! number of worker threads.

use rayon::prelude::*;

use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::scalar::{matmul, matmul_ex, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeometry {
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
}

impl ConvGeometry {
    pub fn out_extent(&self, input: usize) -> Result<usize> {
        let padded = input + 2 * self.padding;
        if self.stride == 0 || padded < self.kernel {
            return Err(Error::InvalidShape(format!(
                "extent {input} too small for {self:?}"
            )));
        }
        Ok((padded - self.kernel) / self.stride + 1)
    }

    /// Output extent of the transposed convolution.
    pub fn transposed_extent(&self, input: usize, output_padding: usize) -> Result<usize> {
        if output_padding >= self.stride.max(1) {
            return Err(Error::InvalidShape(format!(
                "output padding {output_padding} must be below stride {}",
                self.stride
            )));
        }
        let full = self.stride * (input - 1) + self.kernel + output_padding;
        if full <= 2 * self.padding {
            return Err(Error::InvalidShape(format!(
                "transposed geometry {self:?} collapses extent {input}"
            )));
        }
        Ok(full - 2 * self.padding)
    }
}

/// Unfolds `(c, h, w)` into `(c·k·k, oh·ow)` patches with zero padding.
fn im2col<T: Scalar>(x: &[T], c: usize, h: usize, w: usize, g: ConvGeometry, oh: usize, ow: usize, cols: &mut [T]) {
    let (k, s, p) = (g.kernel, g.stride, g.padding as isize);
    let plane = oh * ow;
    for ch in 0..c {
        let src = &x[ch * h * w..(ch + 1) * h * w];
        for ki in 0..k {
            for kj in 0..k {
                let row = ((ch * k + ki) * k + kj) * plane;
                let dst = &mut cols[row..row + plane];
                for oy in 0..oh {
                    let iy = (oy * s + ki) as isize - p;
                    let line = &mut dst[oy * ow..(oy + 1) * ow];
                    if iy < 0 || iy >= h as isize {
                        line.fill(T::zero());
                        continue;
                    }
                    let srow = &src[iy as usize * w..(iy as usize + 1) * w];
                    for (ox, out) in line.iter_mut().enumerate() {
                        let ix = (ox * s + kj) as isize - p;
                        *out = if ix < 0 || ix >= w as isize {
                            T::zero()
                        } else {
                            srow[ix as usize]
                        };
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatters and accumulates into `x`.
fn col2im<T: Scalar>(cols: &[T], c: usize, h: usize, w: usize, g: ConvGeometry, oh: usize, ow: usize, x: &mut [T]) {
    let (k, s, p) = (g.kernel, g.stride, g.padding as isize);
    let plane = oh * ow;
    for ch in 0..c {
        let dst = &mut x[ch * h * w..(ch + 1) * h * w];
        for ki in 0..k {
            for kj in 0..k {
                let row = ((ch * k + ki) * k + kj) * plane;
                let src = &cols[row..row + plane];
                for oy in 0..oh {
                    let iy = (oy * s + ki) as isize - p;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let drow = &mut dst[iy as usize * w..(iy as usize + 1) * w];
                    for (ox, &v) in src[oy * ow..(oy + 1) * ow].iter().enumerate() {
                        let ix = (ox * s + kj) as isize - p;
                        if ix >= 0 && ix < w as isize {
                            drow[ix as usize] += v;
                        }
                    }
                }
            }
        }
    }
}

/// Returns the first two weight extents; `bias_axis` names the one the
/// bias runs along.
fn check_conv_weight<T: Scalar>(weight: &Tensor<T>, bias: &Tensor<T>, k: usize, bias_axis: usize) -> Result<(usize, usize)> {
    match weight.shape()[..] {
        [a, b, kh, kw] if kh == k && kw == k && bias.len() == [a, b][bias_axis] => Ok((a, b)),
        _ => Err(Error::InvalidShape(format!(
            "weight {:?} / bias {:?} do not form a {k}x{k} kernel",
            weight.shape(),
            bias.shape()
        ))),
    }
}

/// Cross-correlation. `weight` is `(out_ch, in_ch, k, k)`.
pub fn conv2d<T: Scalar>(input: &Tensor<T>, weight: &Tensor<T>, bias: &Tensor<T>, g: ConvGeometry) -> Result<Tensor<T>> {
    let (n, c, h, w) = input.dims4()?;
    let (oc, ic) = check_conv_weight(weight, bias, g.kernel, 0)?;
    if ic != c {
        return Err(Error::InvalidShape(format!(
            "input has {c} channels, weight expects {ic}"
        )));
    }
    let (oh, ow) = (g.out_extent(h)?, g.out_extent(w)?);
    let mut out = Tensor::zeros(&[n, oc, oh, ow]);
    let rows = c * g.kernel * g.kernel;
    out.data_mut()
        .par_chunks_mut(oc * oh * ow)
        .zip(input.data().par_chunks(c * h * w))
        .for_each(|(y, x)| {
            let mut cols = vec![T::zero(); rows * oh * ow];
            im2col(x, c, h, w, g, oh, ow, &mut cols);
            matmul(oc, rows, oh * ow, weight.data(), &cols, y);
            add_channel_bias(y, bias.data(), oh * ow);
        });
    Ok(out)
}

fn add_channel_bias<T: Scalar>(y: &mut [T], bias: &[T], plane: usize) {
    for (chunk, &b) in y.chunks_mut(plane).zip(bias) {
        chunk.iter_mut().for_each(|v| *v += b);
    }
}

fn channel_sums<T: Scalar>(dy: &[T], plane: usize) -> Vec<T> {
    dy.chunks(plane).map(|c| c.iter().copied().sum()).collect()
}

pub struct ParamGrads<T> {
    pub input: Tensor<T>,
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

/// Sums per-sample `(dW, db)` pairs in sample order.
fn reduce_in_order<T: Scalar>(parts: &[(Vec<T>, Vec<T>)], wlen: usize, blen: usize) -> (Vec<T>, Vec<T>) {
    let mut dw = vec![T::zero(); wlen];
    let mut db = vec![T::zero(); blen];
    for (w, b) in parts {
        dw.iter_mut().zip(w).for_each(|(a, &v)| *a += v);
        db.iter_mut().zip(b).for_each(|(a, &v)| *a += v);
    }
    (dw, db)
}

pub fn conv2d_backward<T: Scalar>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    grad_out: &Tensor<T>,
    g: ConvGeometry,
) -> Result<ParamGrads<T>> {
    let (n, c, h, w) = input.dims4()?;
    let (_, oc, oh, ow) = grad_out.dims4()?;
    let rows = c * g.kernel * g.kernel;
    let mut dx = Tensor::zeros(&[n, c, h, w]);
    let parts: Vec<(Vec<T>, Vec<T>)> = dx
        .data_mut()
        .par_chunks_mut(c * h * w)
        .zip(input.data().par_chunks(c * h * w))
        .zip(grad_out.data().par_chunks(oc * oh * ow))
        .map(|((dxn, x), dy)| {
            let mut cols = vec![T::zero(); rows * oh * ow];
            im2col(x, c, h, w, g, oh, ow, &mut cols);
            let mut dw = vec![T::zero(); oc * rows];
            // dW = dy · colsᵀ
            matmul_ex(oc, oh * ow, rows, dy, false, &cols, true, T::zero(), &mut dw);
            // dcols = Wᵀ · dy
            matmul_ex(rows, oc, oh * ow, weight.data(), true, dy, false, T::zero(), &mut cols);
            col2im(&cols, c, h, w, g, oh, ow, dxn);
            (dw, channel_sums(dy, oh * ow))
        })
        .collect();
    let (dw, db) = reduce_in_order(&parts, weight.len(), oc);
    Ok(ParamGrads {
        input: dx,
        weight: Tensor::from_vec(weight.shape(), dw)?,
        bias: Tensor::from_vec(&[oc], db)?,
    })
}

/// Transposed convolution (the adjoint of [`conv2d`] plus bias).
/// `weight` is `(in_ch, out_ch, k, k)`.
pub fn transposed_conv2d<T: Scalar>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    bias: &Tensor<T>,
    g: ConvGeometry,
    output_padding: usize,
) -> Result<Tensor<T>> {
    let (n, c, h, w) = input.dims4()?;
    let (ic, oc) = check_conv_weight(weight, bias, g.kernel, 1)?;
    if ic != c {
        return Err(Error::InvalidShape(format!(
            "input has {c} channels, weight expects {ic}"
        )));
    }
    let oh = g.transposed_extent(h, output_padding)?;
    let ow = g.transposed_extent(w, output_padding)?;
    debug_assert_eq!(g.out_extent(oh)?, h);
    let rows = oc * g.kernel * g.kernel;
    let mut out = Tensor::zeros(&[n, oc, oh, ow]);
    out.data_mut()
        .par_chunks_mut(oc * oh * ow)
        .zip(input.data().par_chunks(c * h * w))
        .for_each(|(y, x)| {
            let mut cols = vec![T::zero(); rows * h * w];
            matmul_ex(rows, c, h * w, weight.data(), true, x, false, T::zero(), &mut cols);
            col2im(&cols, oc, oh, ow, g, h, w, y);
            add_channel_bias(y, bias.data(), oh * ow);
        });
    Ok(out)
}

pub fn transposed_conv2d_backward<T: Scalar>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    grad_out: &Tensor<T>,
    g: ConvGeometry,
) -> Result<ParamGrads<T>> {
    let (n, c, h, w) = input.dims4()?;
    let (_, oc, oh, ow) = grad_out.dims4()?;
    let rows = oc * g.kernel * g.kernel;
    let mut dx = Tensor::zeros(&[n, c, h, w]);
    let parts: Vec<(Vec<T>, Vec<T>)> = dx
        .data_mut()
        .par_chunks_mut(c * h * w)
        .zip(input.data().par_chunks(c * h * w))
        .zip(grad_out.data().par_chunks(oc * oh * ow))
        .map(|((dxn, x), dy)| {
            let mut cols = vec![T::zero(); rows * h * w];
            im2col(dy, oc, oh, ow, g, h, w, &mut cols);
            // dx = W · cols
            matmul(c, rows, h * w, weight.data(), &cols, dxn);
            // dW = x · colsᵀ
            let mut dw = vec![T::zero(); c * rows];
            matmul_ex(c, h * w, rows, x, false, &cols, true, T::zero(), &mut dw);
            (dw, channel_sums(dy, oh * ow))
        })
        .collect();
    let (dw, db) = reduce_in_order(&parts, weight.len(), oc);
    Ok(ParamGrads {
        input: dx,
        weight: Tensor::from_vec(weight.shape(), dw)?,
        bias: Tensor::from_vec(&[oc], db)?,
    })
}

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Per-channel statistics of one training-mode batch-norm pass.
#[derive(Clone, Debug)]
pub struct BatchStats<T> {
    pub mean: Vec<T>,
    /// Biased (population) variance.
    pub var: Vec<T>,
    pub count: usize,
}

fn batch_stats<T: Scalar>(x: &Tensor<T>) -> Result<BatchStats<T>> {
    let (n, c, h, w) = x.dims4()?;
    let plane = h * w;
    let count = n * plane;
    let cnt = T::from_usize(count).unwrap();
    let (mean, var): (Vec<T>, Vec<T>) = (0..c)
        .into_par_iter()
        .map(|ch| {
            let mut sum = T::zero();
            for s in 0..n {
                let off = (s * c + ch) * plane;
                sum += x.data()[off..off + plane].iter().copied().sum::<T>();
            }
            let mean = sum / cnt;
            let mut sq = T::zero();
            for s in 0..n {
                let off = (s * c + ch) * plane;
                sq += x.data()[off..off + plane]
                    .iter()
                    .map(|&v| (v - mean) * (v - mean))
                    .sum::<T>();
            }
            (mean, sq / cnt)
        })
        .unzip();
    Ok(BatchStats { mean, var, count })
}

/// Normalizes per channel with `stats` then applies `gamma`/`beta`.
fn affine_normalize<T: Scalar>(x: &Tensor<T>, mean: &[T], var: &[T], gamma: &[T], beta: &[T]) -> Result<Tensor<T>> {
    let (_, c, h, w) = x.dims4()?;
    let eps = T::from_f64_lossy(BN_EPS);
    let plane = h * w;
    let mut out = x.clone();
    out.data_mut()
        .par_chunks_mut(plane)
        .enumerate()
        .for_each(|(i, chunk)| {
            let ch = i % c;
            let scale = gamma[ch] / (var[ch] + eps).sqrt();
            let shift = beta[ch] - mean[ch] * scale;
            chunk.iter_mut().for_each(|v| *v = *v * scale + shift);
        });
    Ok(out)
}

/// Training mode normalizes with batch statistics (returned so the caller
/// can fold them into running statistics); eval mode uses `running`.
pub fn batch_norm<T: Scalar>(
    input: &Tensor<T>,
    gamma: &Tensor<T>,
    beta: &Tensor<T>,
    mode: Mode,
    running: (&Tensor<T>, &Tensor<T>),
) -> Result<(Tensor<T>, Option<BatchStats<T>>)> {
    let (n, c, h, w) = input.dims4()?;
    if gamma.len() != c || beta.len() != c || running.0.len() != c || running.1.len() != c {
        return Err(Error::InvalidShape(format!(
            "batch norm over {c} channels got parameters of length {}",
            gamma.len()
        )));
    }
    match mode {
        Mode::Train => {
            if n * h * w == 1 {
                log::warn!("batch norm over a single value per channel; variance is zero");
            }
            let stats = batch_stats(input)?;
            let out = affine_normalize(input, &stats.mean, &stats.var, gamma.data(), beta.data())?;
            Ok((out, Some(stats)))
        }
        Mode::Eval => {
            let out = affine_normalize(
                input,
                running.0.data(),
                running.1.data(),
                gamma.data(),
                beta.data(),
            )?;
            Ok((out, None))
        }
    }
}

/// Exponential moving average update; running variance uses the unbiased
/// batch estimate.
pub fn update_running_stats<T: Scalar>(stats: &BatchStats<T>, running_mean: &mut Tensor<T>, running_var: &mut Tensor<T>) {
    let m = T::from_f64_lossy(BN_MOMENTUM);
    let keep = T::one() - m;
    let correction = if stats.count > 1 {
        T::from_usize(stats.count).unwrap() / T::from_usize(stats.count - 1).unwrap()
    } else {
        T::one()
    };
    for ch in 0..stats.mean.len() {
        let rm = &mut running_mean.data_mut()[ch];
        *rm = keep * *rm + m * stats.mean[ch];
        let rv = &mut running_var.data_mut()[ch];
        *rv = keep * *rv + m * stats.var[ch] * correction;
    }
}

pub struct NormGrads<T> {
    pub input: Tensor<T>,
    pub gamma: Tensor<T>,
    pub beta: Tensor<T>,
}

/// Backward pass through training-mode batch norm.
pub fn batch_norm_backward<T: Scalar>(
    input: &Tensor<T>,
    gamma: &Tensor<T>,
    stats: &BatchStats<T>,
    grad_out: &Tensor<T>,
) -> Result<NormGrads<T>> {
    let (n, c, h, w) = input.dims4()?;
    let plane = h * w;
    let eps = T::from_f64_lossy(BN_EPS);
    let cnt = T::from_usize(n * plane).unwrap();
    let inv_std: Vec<T> = stats.var.iter().map(|&v| T::one() / (v + eps).sqrt()).collect();
    let (dgamma, dbeta): (Vec<T>, Vec<T>) = (0..c)
        .into_par_iter()
        .map(|ch| {
            let (mut dg, mut db) = (T::zero(), T::zero());
            for s in 0..n {
                let off = (s * c + ch) * plane;
                for i in off..off + plane {
                    let xhat = (input.data()[i] - stats.mean[ch]) * inv_std[ch];
                    dg += grad_out.data()[i] * xhat;
                    db += grad_out.data()[i];
                }
            }
            (dg, db)
        })
        .unzip();
    let mut dx = Tensor::zeros(input.shape());
    dx.data_mut()
        .par_chunks_mut(plane)
        .enumerate()
        .for_each(|(blk, chunk)| {
            let ch = blk % c;
            let off = blk * plane;
            let k = gamma.data()[ch] * inv_std[ch] / cnt;
            for (j, v) in chunk.iter_mut().enumerate() {
                let i = off + j;
                let xhat = (input.data()[i] - stats.mean[ch]) * inv_std[ch];
                *v = k * (cnt * grad_out.data()[i] - dbeta[ch] - xhat * dgamma[ch]);
            }
        });
    Ok(NormGrads {
        input: dx,
        gamma: Tensor::from_vec(&[c], dgamma)?,
        beta: Tensor::from_vec(&[c], dbeta)?,
    })
}

pub fn leaky_relu<T: Scalar>(input: &Tensor<T>, slope: T) -> Tensor<T> {
    input.map(|v| if v >= T::zero() { v } else { slope * v })
}

pub fn leaky_relu_backward<T: Scalar>(input: &Tensor<T>, slope: T, grad_out: &Tensor<T>) -> Tensor<T> {
    let mut dx = grad_out.clone();
    dx.data_mut()
        .iter_mut()
        .zip(input.data())
        .for_each(|(g, &x)| {
            if x < T::zero() {
                *g *= slope;
            }
        });
    dx
}

pub fn sigmoid<T: Scalar>(input: &Tensor<T>) -> Tensor<T> {
    input.map(|v| T::one() / (T::one() + (-v).exp()))
}

pub fn sigmoid_backward<T: Scalar>(output: &Tensor<T>, grad_out: &Tensor<T>) -> Tensor<T> {
    let mut dx = grad_out.clone();
    dx.data_mut()
        .iter_mut()
        .zip(output.data())
        .for_each(|(g, &y)| *g *= y * (T::one() - y));
    dx
}

/// Mean of squared differences over all elements.
pub fn mse_loss<T: Scalar>(output: &Tensor<T>, target: &Tensor<T>) -> Result<T> {
    if output.shape() != target.shape() {
        return Err(Error::InvalidShape(format!(
            "loss between {:?} and {:?}",
            output.shape(),
            target.shape()
        )));
    }
    let sum: T = output
        .data()
        .iter()
        .zip(target.data())
        .map(|(&a, &b)| (a - b) * (a - b))
        .sum();
    Ok(sum / T::from_usize(output.len()).unwrap())
}

pub fn mse_loss_grad<T: Scalar>(output: &Tensor<T>, target: &Tensor<T>) -> Result<Tensor<T>> {
    if output.shape() != target.shape() {
        return Err(Error::InvalidShape(format!(
            "loss between {:?} and {:?}",
            output.shape(),
            target.shape()
        )));
    }
    let scale = T::from_f64_lossy(2.0) / T::from_usize(output.len()).unwrap();
    let data = output
        .data()
        .iter()
        .zip(target.data())
        .map(|(&a, &b)| scale * (a - b))
        .collect();
    Tensor::from_vec(output.shape(), data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn g(k: usize, s: usize, p: usize) -> ConvGeometry {
        ConvGeometry { kernel: k, stride: s, padding: p }
    }

    fn random(shape: &[usize], seed: u64) -> Tensor<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = shape.iter().product();
        Tensor::from_vec(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    /// Direct six-loop cross-correlation.
    fn naive_conv(x: &Tensor<f64>, wt: &Tensor<f64>, b: &Tensor<f64>, geo: ConvGeometry) -> Tensor<f64> {
        let (n, c, h, w) = x.dims4().unwrap();
        let oc = wt.shape()[0];
        let k = geo.kernel;
        let (oh, ow) = (geo.out_extent(h).unwrap(), geo.out_extent(w).unwrap());
        let mut out = Tensor::zeros(&[n, oc, oh, ow]);
        for s in 0..n {
            for o in 0..oc {
                for oy in 0..oh {
                    for ox in 0..ow {
                        let mut acc = b.data()[o];
                        for i in 0..c {
                            for ki in 0..k {
                                for kj in 0..k {
                                    let iy = (oy * geo.stride + ki) as isize - geo.padding as isize;
                                    let ix = (ox * geo.stride + kj) as isize - geo.padding as isize;
                                    if iy >= 0 && ix >= 0 && (iy as usize) < h && (ix as usize) < w {
                                        acc += x.data()[((s * c + i) * h + iy as usize) * w + ix as usize]
                                            * wt.data()[((o * c + i) * k + ki) * k + kj];
                                    }
                                }
                            }
                        }
                        out.data_mut()[((s * oc + o) * oh + oy) * ow + ox] = acc;
                    }
                }
            }
        }
        out
    }

    #[test]
    fn conv_all_ones_sums_to_nine() {
        let x = Tensor::<f32>::full(&[1, 1, 3, 3], 1.0);
        let wt = Tensor::full(&[1, 1, 3, 3], 1.0);
        let y = conv2d(&x, &wt, &Tensor::zeros(&[1]), g(3, 1, 0)).unwrap();
        assert_eq!(y.shape(), &[1, 1, 1, 1]);
        assert_eq!(y.data()[0], 9.0);
    }

    #[test]
    fn conv_delta_kernel_is_identity() {
        let x = random(&[2, 3, 7, 5], 1);
        let mut wt = Tensor::zeros(&[3, 3, 3, 3]);
        for c in 0..3 {
            wt.data_mut()[((c * 3 + c) * 3 + 1) * 3 + 1] = 1.0;
        }
        let y = conv2d(&x, &wt, &Tensor::zeros(&[3]), g(3, 1, 1)).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn conv_extent_formula() {
        let geo = g(3, 2, 1);
        assert_eq!(geo.out_extent(256).unwrap(), 128);
        assert_eq!(geo.out_extent(128).unwrap(), 64);
        let x = Tensor::<f32>::zeros(&[1, 1, 256, 256]);
        let y = conv2d(&x, &Tensor::zeros(&[2, 1, 3, 3]), &Tensor::zeros(&[2]), geo).unwrap();
        assert_eq!(y.shape(), &[1, 2, 128, 128]);
    }

    #[test]
    fn conv_matches_naive() {
        for (geo, hw) in [(g(3, 1, 1), (6, 5)), (g(3, 2, 1), (8, 7)), (g(3, 2, 0), (9, 9)), (g(1, 1, 0), (4, 4))] {
            let x = random(&[2, 3, hw.0, hw.1], 2);
            let wt = random(&[4, 3, geo.kernel, geo.kernel], 3);
            let b = random(&[4], 4);
            let fast = conv2d(&x, &wt, &b, geo).unwrap();
            let slow = naive_conv(&x, &wt, &b, geo);
            assert_eq!(fast.shape(), slow.shape());
            for (a, e) in fast.data().iter().zip(slow.data()) {
                assert!((a - e).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn conv_rejects_channel_mismatch() {
        let x = Tensor::<f32>::zeros(&[1, 2, 4, 4]);
        let wt = Tensor::zeros(&[1, 3, 3, 3]);
        assert!(matches!(
            conv2d(&x, &wt, &Tensor::zeros(&[1]), g(3, 1, 1)),
            Err(Error::InvalidShape(_))
        ));
    }

    #[test]
    fn tconv_single_value_spreads() {
        let x = Tensor::<f32>::full(&[1, 1, 1, 1], 2.5);
        let wt = Tensor::full(&[1, 1, 3, 3], 1.0);
        let y = transposed_conv2d(&x, &wt, &Tensor::zeros(&[1]), g(3, 1, 0), 0).unwrap();
        assert_eq!(y.shape(), &[1, 1, 3, 3]);
        assert!(y.data().iter().all(|&v| v == 2.5));
    }

    #[test]
    fn tconv_zero_input_gives_bias() {
        let x = Tensor::<f32>::zeros(&[2, 4, 5, 5]);
        let wt = Tensor::full(&[4, 2, 3, 3], 0.3);
        let b = Tensor::from_vec(&[2], vec![0.5, -1.0]).unwrap();
        let y = transposed_conv2d(&x, &wt, &b, g(3, 2, 1), 1).unwrap();
        assert_eq!(y.shape(), &[2, 2, 10, 10]);
        for (i, v) in y.data().iter().enumerate() {
            assert_eq!(*v, if (i / 100) % 2 == 0 { 0.5 } else { -1.0 });
        }
    }

    #[test]
    fn tconv_doubles_extent() {
        let geo = g(3, 2, 1);
        assert_eq!(geo.transposed_extent(64, 1).unwrap(), 128);
        assert_eq!(geo.transposed_extent(128, 1).unwrap(), 256);
        assert!(geo.transposed_extent(64, 2).is_err());
    }

    #[test]
    fn tconv_is_adjoint_of_conv() {
        for (geo, op, hw) in [(g(3, 2, 1), 1, 8), (g(3, 1, 1), 0, 6), (g(3, 2, 1), 0, 7)] {
            let x = random(&[2, 3, hw, hw], 10);
            let wt = random(&[4, 3, 3, 3], 11);
            let cx = conv2d(&x, &wt, &Tensor::zeros(&[4]), geo).unwrap();
            let y = random(cx.shape(), 12);
            let ty = transposed_conv2d(&y, &wt, &Tensor::zeros(&[3]), geo, op).unwrap();
            if ty.shape() != x.shape() {
                continue;
            }
            let lhs = cx.dot(&y);
            let rhs = x.dot(&ty);
            assert!((lhs - rhs).abs() < 1e-4 * lhs.abs().max(1.0), "{lhs} vs {rhs}");
        }
        // f32 as well, at the documented tolerance.
        let x = random(&[1, 2, 8, 8], 20).cast::<f32>();
        let wt = random(&[3, 2, 3, 3], 21).cast::<f32>();
        let cx = conv2d(&x, &wt, &Tensor::zeros(&[3]), g(3, 2, 1)).unwrap();
        let y = random(cx.shape(), 22).cast::<f32>();
        let ty = transposed_conv2d(&y, &wt, &Tensor::zeros(&[2]), g(3, 2, 1), 1).unwrap();
        assert!((cx.dot(&y) - x.dot(&ty)).abs() < 1e-4);
    }

    #[test]
    fn batch_norm_constant_input_is_zero() {
        let x = Tensor::<f32>::full(&[2, 3, 4, 4], 7.0);
        let ones = Tensor::full(&[3], 1.0);
        let zeros = Tensor::zeros(&[3]);
        let (y, _) = batch_norm(&x, &ones, &zeros, Mode::Train, (&zeros, &ones)).unwrap();
        assert!(y.data().iter().all(|v| v.abs() <= 1e-2));
    }

    #[test]
    fn batch_norm_standardizes_then_applies_affine() {
        let x = random(&[3, 2, 5, 5], 5).map(|v| 3.0 * v + 1.0);
        let zeros = Tensor::zeros(&[2]);
        let ones = Tensor::full(&[2], 1.0);
        let (y, stats) = batch_norm(&x, &ones, &zeros, Mode::Train, (&zeros, &ones)).unwrap();
        let per_channel = |t: &Tensor<f64>, ch: usize| -> Vec<f64> {
            (0..3).flat_map(|s| t.data()[(s * 2 + ch) * 25..(s * 2 + ch + 1) * 25].to_vec()).collect()
        };
        for ch in 0..2 {
            let v = per_channel(&y, ch);
            let m = v.iter().sum::<f64>() / v.len() as f64;
            let var = v.iter().map(|a| (a - m) * (a - m)).sum::<f64>() / v.len() as f64;
            assert!(m.abs() < 1e-3 && (var - 1.0).abs() < 1e-3);
        }
        assert!(stats.is_some());
        let gamma = Tensor::full(&[2], 2.0);
        let beta = Tensor::full(&[2], 5.0);
        let (z, _) = batch_norm(&y, &gamma, &beta, Mode::Train, (&zeros, &ones)).unwrap();
        for ch in 0..2 {
            let v = per_channel(&z, ch);
            let m = v.iter().sum::<f64>() / v.len() as f64;
            let sd = (v.iter().map(|a| (a - m) * (a - m)).sum::<f64>() / v.len() as f64).sqrt();
            assert!((m - 5.0).abs() < 1e-3 && (sd - 2.0).abs() < 1e-3);
        }
    }

    #[test]
    fn running_stats_follow_momentum() {
        let x = Tensor::<f64>::from_vec(&[2, 1, 1, 2], vec![1.0, 3.0, 5.0, 7.0]).unwrap();
        let zeros = Tensor::zeros(&[1]);
        let ones = Tensor::full(&[1], 1.0);
        let (_, stats) = batch_norm(&x, &ones, &zeros, Mode::Train, (&zeros, &ones)).unwrap();
        let (mut rm, mut rv) = (Tensor::zeros(&[1]), Tensor::full(&[1], 1.0));
        update_running_stats(&stats.unwrap(), &mut rm, &mut rv);
        // mean 4, unbiased var 20/3
        assert!((rm.data()[0] - 0.4).abs() < 1e-12);
        assert!((rv.data()[0] - (0.9 + 0.1 * 20.0 / 3.0)).abs() < 1e-12);
        let (y, none) = batch_norm(&x, &ones, &zeros, Mode::Eval, (&rm, &rv)).unwrap();
        assert!(none.is_none());
        let expect = (1.0 - 0.4) / (rv.data()[0] + BN_EPS).sqrt();
        assert!((y.data()[0] - expect).abs() < 1e-12);
    }

    #[test]
    fn leaky_relu_values_and_slope() {
        let x = Tensor::<f64>::from_vec(&[3], vec![5.0, -2.0, -1.0]).unwrap();
        let y = leaky_relu(&x, 0.01);
        assert_eq!(y.data()[0], 5.0);
        assert!((y.data()[1] + 0.02).abs() < 1e-15);
        // Finite difference at x = -1.
        let h = 1e-6;
        let f = |v: f64| leaky_relu(&Tensor::from_vec(&[1], vec![v]).unwrap(), 0.01).data()[0];
        let fd = (f(-1.0 + h) - f(-1.0 - h)) / (2.0 * h);
        let an: Tensor<f64> = leaky_relu_backward(
            &Tensor::from_vec(&[1], vec![-1.0]).unwrap(),
            0.01,
            &Tensor::full(&[1], 1.0),
        );
        assert!((fd - 0.01).abs() < 1e-9 && (an.data()[0] - 0.01).abs() < 1e-15);
    }

    #[test]
    fn mse_values() {
        let a = Tensor::<f64>::from_vec(&[2], vec![1.0, 2.0]).unwrap();
        let z = Tensor::zeros(&[2]);
        assert_eq!(mse_loss(&a, &a).unwrap(), 0.0);
        assert_eq!(mse_loss(&a, &z).unwrap(), 2.5);
        assert_eq!(mse_loss(&Tensor::full(&[3, 2], 1.0), &Tensor::zeros(&[3, 2])).unwrap(), 1.0);
        assert!(matches!(mse_loss(&a, &Tensor::zeros(&[3])), Err(Error::InvalidShape(_))));
    }
}
