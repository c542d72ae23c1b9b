//! Quantized model container (`TGQ1`), all fields little-endian:
//!
//! ```text
//! offset  size        field
//! 0       4           magic "TGQ1"
//! 4       4           u32 width count L+1
//! 8       4·(L+1)     u32 layer widths, input first
//! ..      1           u8 hidden activation tag (0 = ReLU)
//! ..      9           input activation: f64 scale, i8 zero point
//! ..      18·L        per layer: f64 weight scale, i8 weight zero point,
//!                                f64 output scale, i8 output zero point
//! ..      Σ in·out    i8 weights, layer by layer, each fan_out × fan_in row-major
//! ..      4·Σ out     i32 biases, layer by layer
//! ```
//!
//! Pruned weights are stored as ordinary zeros, so the size depends only on the spec.

use std::fs;
use std::path::Path;

use super::{ActQuant, QuantError, QuantLayer, QuantTensor, QuantizedModel};
use crate::nn::LayerSpec;

pub const QUANT_MAGIC: &[u8; 4] = b"TGQ1";

impl QuantizedModel {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(Self::encoded_len(&self.spec));
        crate::nn::io_header(&mut out, QUANT_MAGIC, &self.spec);
        out.extend_from_slice(&self.input.scale.to_le_bytes());
        out.push(self.input.zero_point as u8);
        for l in &self.layers {
            out.extend_from_slice(&l.weights.scale.to_le_bytes());
            out.push(l.weights.zero_point as u8);
            out.extend_from_slice(&l.output.scale.to_le_bytes());
            out.push(l.output.zero_point as u8);
        }
        for l in &self.layers {
            out.extend(l.weights.data.iter().map(|&q| q as u8));
        }
        for l in &self.layers {
            for b in &l.bias {
                out.extend_from_slice(&b.to_le_bytes());
            }
        }
        out
    }

    /// Exact container size for a model of this shape.
    pub fn encoded_len(spec: &LayerSpec) -> usize {
        let header = 4 + 4 + 4 * spec.sizes().len() + 1 + 9 + 18 * spec.layer_count();
        let weights: usize = spec.layer_dims().map(|(i, o)| i * o).sum();
        let biases: usize = spec.layer_dims().map(|(_, o)| 4 * o).sum();
        header + weights + biases
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, QuantError> {
        let mut r = crate::nn::ByteReader::new(bytes);
        let mut parse = || -> Result<QuantizedModel, String> {
            let spec = r.spec_header(QUANT_MAGIC)?;
            let act = |r: &mut crate::nn::ByteReader| -> Result<ActQuant, String> {
                let scale = r.f64()?;
                let zero_point = r.i8()?;
                if !(scale > 0.0 && scale.is_finite()) {
                    return Err(format!("invalid scale {scale}"));
                }
                Ok(ActQuant { scale, zero_point })
            };
            let input = act(&mut r)?;
            let mut params = Vec::with_capacity(spec.layer_count());
            for _ in 0..spec.layer_count() {
                let w = act(&mut r)?;
                let o = act(&mut r)?;
                params.push((w, o));
            }
            let mut weights = Vec::with_capacity(spec.layer_count());
            for ((fan_in, fan_out), (w, _)) in spec.layer_dims().zip(&params) {
                let data = r.take(fan_in * fan_out)?.iter().map(|&b| b as i8).collect();
                weights.push(QuantTensor {
                    data,
                    scale: w.scale,
                    zero_point: w.zero_point,
                });
            }
            let mut layers = Vec::with_capacity(spec.layer_count());
            for (((fan_in, fan_out), (_, output)), weights) in
                spec.layer_dims().zip(params).zip(weights)
            {
                let bias = (0..fan_out).map(|_| r.i32()).collect::<Result<_, _>>()?;
                layers.push(QuantLayer {
                    fan_in,
                    fan_out,
                    weights,
                    bias,
                    output,
                });
            }
            r.finish()?;
            Ok(QuantizedModel {
                spec,
                input,
                layers,
            })
        };
        parse().map_err(QuantError::Format)
    }
}

pub fn write_quantized(model: &QuantizedModel, path: impl AsRef<Path>) -> Result<(), QuantError> {
    fs::write(path, model.to_bytes())?;
    Ok(())
}

pub fn read_quantized(path: impl AsRef<Path>) -> Result<QuantizedModel, QuantError> {
    QuantizedModel::from_bytes(&fs::read(path)?)
}

pub fn model_size_bytes(path: impl AsRef<Path>) -> Result<u64, QuantError> {
    Ok(fs::metadata(path)?.len())
}
