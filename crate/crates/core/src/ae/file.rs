//! Binary model format.
//!
//! ```text
//! "SAE1" | version u16 | layer count u16
//! per layer: tag u8 | extent count u8 | extents u32… | geometry u32… | f32 blocks…
//! ```
//! All integers and floats are little-endian. Convolutions store
//! `stride, padding` (and `output_padding` for transposed convolutions)
//! as geometry; batch norm stores γ, β, running mean, running variance.

use std::path::Path;

use super::layer::Layer;
use super::model::{AeModel, Sequential};
use super::ops::ConvGeometry;
use super::tensor::Tensor;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"SAE1";
pub const VERSION: u16 = 1;

const TAG_CONV: u8 = 1;
const TAG_TCONV: u8 = 2;
const TAG_BN: u8 = 3;
const TAG_LRELU: u8 = 4;
const TAG_SIGMOID: u8 = 5;

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u32).to_le_bytes());
}

fn put_block(out: &mut Vec<u8>, t: &Tensor<f32>) {
    for v in t.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub fn encode_net(net: &Sequential<f32>) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(net.layers().len() as u16).to_le_bytes());
    for layer in net.layers() {
        match layer {
            Layer::Conv { weight, bias, geometry } | Layer::ConvTranspose { weight, bias, geometry, .. } => {
                let tconv = matches!(layer, Layer::ConvTranspose { .. });
                out.push(if tconv { TAG_TCONV } else { TAG_CONV });
                out.push(4);
                weight.shape().iter().for_each(|&d| put_u32(&mut out, d));
                put_u32(&mut out, geometry.stride);
                put_u32(&mut out, geometry.padding);
                if let Layer::ConvTranspose { output_padding, .. } = layer {
                    put_u32(&mut out, *output_padding);
                }
                put_block(&mut out, weight);
                put_block(&mut out, bias);
            }
            Layer::BatchNorm {
                gamma,
                beta,
                running_mean,
                running_var,
            } => {
                out.push(TAG_BN);
                out.push(1);
                put_u32(&mut out, gamma.len());
                for t in [gamma, beta, running_mean, running_var] {
                    put_block(&mut out, t);
                }
            }
            Layer::LeakyRelu { slope } => {
                out.push(TAG_LRELU);
                out.push(0);
                out.extend_from_slice(&slope.to_le_bytes());
            }
            Layer::Sigmoid => {
                out.push(TAG_SIGMOID);
                out.push(0);
            }
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::CorruptModel(format!(
                "truncated at byte {} (needed {n} more)",
                self.pos
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }

    fn block(&mut self, shape: &[usize]) -> Result<Tensor<f32>> {
        let n = shape
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .and_then(|n| n.checked_mul(4).map(|_| n))
            .ok_or_else(|| Error::CorruptModel(format!("absurd extents {shape:?}")))?;
        let bytes = self.take(n * 4)?;
        let data = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Tensor::from_vec(shape, data).map_err(|e| Error::CorruptModel(e.to_string()))
    }
}

pub fn decode_net(buf: &[u8]) -> Result<Sequential<f32>> {
    let mut r = Reader { buf, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::CorruptModel("bad magic bytes".into()));
    }
    let version = r.u16()?;
    if version != VERSION {
        return Err(Error::CorruptModel(format!("unsupported version {version}")));
    }
    let count = r.u16()? as usize;
    let mut layers = Vec::with_capacity(count);
    for i in 0..count {
        let tag = r.u8()?;
        let n_ext = r.u8()? as usize;
        let extents = (0..n_ext).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
        let want = match tag {
            TAG_CONV | TAG_TCONV => 4,
            TAG_BN => 1,
            TAG_LRELU | TAG_SIGMOID => 0,
            _ => return Err(Error::CorruptModel(format!("layer {i}: unknown tag {tag}"))),
        };
        if n_ext != want || extents.contains(&0) {
            return Err(Error::CorruptModel(format!("layer {i}: bad extents {extents:?}")));
        }
        let layer = match tag {
            TAG_CONV | TAG_TCONV => {
                let geometry = ConvGeometry {
                    kernel: extents[2],
                    stride: r.u32()?,
                    padding: r.u32()?,
                };
                let output_padding = if tag == TAG_TCONV { r.u32()? } else { 0 };
                let bias_len = if tag == TAG_CONV { extents[0] } else { extents[1] };
                let weight = r.block(&extents)?;
                let bias = r.block(&[bias_len])?;
                if tag == TAG_CONV {
                    Layer::Conv { weight, bias, geometry }
                } else {
                    Layer::ConvTranspose {
                        weight,
                        bias,
                        geometry,
                        output_padding,
                    }
                }
            }
            TAG_BN => Layer::BatchNorm {
                gamma: r.block(&extents)?,
                beta: r.block(&extents)?,
                running_mean: r.block(&extents)?,
                running_var: r.block(&extents)?,
            },
            TAG_LRELU => Layer::LeakyRelu {
                slope: r.block(&[1])?.data()[0],
            },
            _ => Layer::Sigmoid,
        };
        let spec = layer.spec();
        if spec.kernel != 0 && spec.kernel != extents[3] {
            return Err(Error::CorruptModel(format!("layer {i}: non-square kernel")));
        }
        spec.validate()
            .map_err(|e| Error::CorruptModel(format!("layer {i}: {e}")))?;
        layers.push(layer);
    }
    if r.pos != buf.len() {
        return Err(Error::CorruptModel(format!(
            "{} trailing bytes",
            buf.len() - r.pos
        )));
    }
    Ok(Sequential::new(layers))
}

pub fn save_model(model: &AeModel<f32>, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, encode_net(model.net())).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<AeModel<f32>> {
    let buf = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let net = decode_net(&buf)?;
    AeModel::from_net(net).map_err(|e| Error::CorruptModel(format!("{}: {e}", path.display())))
}
