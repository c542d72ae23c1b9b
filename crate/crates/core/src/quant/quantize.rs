use serde::{Deserialize, Serialize};

use super::QuantError;
use crate::dataset::Dataset;
use crate::gesture::{GestureEvent, GestureLabel};
use crate::nn::{argmax, forward, softmax, LayerSpec, MlpParams, Probabilities};

/// Affine int8 parameters: `real = scale · (q − zero_point)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActQuant {
    pub scale: f64,
    pub zero_point: i8,
}

impl ActQuant {
    /// Maps `[min(lo, 0), max(hi, 0)]` onto `[-128, 127]`. A zero-width range gets scale 1.
    pub fn from_range(lo: f64, hi: f64) -> Self {
        let lo = lo.min(0.0);
        let hi = hi.max(0.0);
        if !(hi - lo > 0.0) {
            return Self {
                scale: 1.0,
                zero_point: 0,
            };
        }
        let scale = (hi - lo) / 255.0;
        let zp = (-128.0 - lo / scale).round_ties_even().clamp(-128.0, 127.0);
        Self {
            scale,
            zero_point: zp as i8,
        }
    }

    #[inline]
    pub fn quantize(&self, v: f64) -> i8 {
        ((v / self.scale).round_ties_even() + self.zero_point as f64).clamp(-128.0, 127.0) as i8
    }

    #[inline]
    pub fn dequantize(&self, q: i8) -> f64 {
        self.scale * (q as i32 - self.zero_point as i32) as f64
    }
}

/// An int8 tensor with one scale and zero point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantTensor {
    pub data: Vec<i8>,
    pub scale: f64,
    pub zero_point: i8,
}

impl QuantTensor {
    /// Symmetric per-tensor quantization: zero point 0, `scale = max|v| / 127`.
    /// An all-zero tensor gets scale 1.
    pub fn symmetric(values: &[f64]) -> Self {
        let max_abs = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let scale = if max_abs > 0.0 { max_abs / 127.0 } else { 1.0 };
        let data = values
            .iter()
            .map(|v| (v / scale).round_ties_even().clamp(-127.0, 127.0) as i8)
            .collect();
        Self {
            data,
            scale,
            zero_point: 0,
        }
    }

    pub fn dequantize(&self) -> Vec<f64> {
        self.data
            .iter()
            .map(|&q| self.scale * (q as i32 - self.zero_point as i32) as f64)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantLayer {
    pub fan_in: usize,
    pub fan_out: usize,
    /// `fan_out × fan_in`, row-major.
    pub weights: QuantTensor,
    /// At scale `input_scale · weight_scale`, zero point 0.
    pub bias: Vec<i32>,
    /// Quantization of this layer's (post-activation) output.
    pub output: ActQuant,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedModel {
    pub spec: LayerSpec,
    pub input: ActQuant,
    pub layers: Vec<QuantLayer>,
}

fn range_of(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    })
}

/// Full-integer quantization calibrated on the float model's activation ranges.
pub fn quantize(params: &MlpParams, calibration: &Dataset) -> Result<QuantizedModel, QuantError> {
    if calibration.is_empty() {
        return Err(QuantError::EmptyCalibration);
    }
    let n_layers = params.layers.len();
    let mut input_range = (f64::INFINITY, f64::NEG_INFINITY);
    let mut ranges = vec![(f64::INFINITY, f64::NEG_INFINITY); n_layers];
    for s in &calibration.samples {
        let (lo, hi) = range_of(s.features.iter().copied());
        input_range = (input_range.0.min(lo), input_range.1.max(hi));
        for (r, out) in ranges.iter_mut().zip(params.activations(&s.features)?) {
            let (lo, hi) = range_of(out.into_iter());
            *r = (r.0.min(lo), r.1.max(hi));
        }
    }

    let input = ActQuant::from_range(input_range.0, input_range.1);
    let mut in_scale = input.scale;
    let mut layers = Vec::with_capacity(n_layers);
    for (layer, (lo, hi)) in params.layers.iter().zip(ranges) {
        let weights = QuantTensor::symmetric(&layer.weights);
        let bias_scale = in_scale * weights.scale;
        let bias = layer
            .bias
            .iter()
            .map(|b| (b / bias_scale).round_ties_even().clamp(i32::MIN as f64, i32::MAX as f64) as i32)
            .collect();
        let output = ActQuant::from_range(lo, hi);
        in_scale = output.scale;
        layers.push(QuantLayer {
            fan_in: layer.fan_in,
            fan_out: layer.fan_out,
            weights,
            bias,
            output,
        });
    }
    Ok(QuantizedModel {
        spec: params.spec.clone(),
        input,
        layers,
    })
}

impl QuantizedModel {
    /// Integer forward pass; returns the dequantized logits.
    pub fn logits(&self, features: &[f64]) -> Result<Vec<f64>, QuantError> {
        if features.len() != self.spec.input_len() {
            return Err(crate::nn::NetError::InputLen {
                expected: self.spec.input_len(),
                got: features.len(),
            }
            .into());
        }
        let mut act: Vec<i8> = features.iter().map(|v| self.input.quantize(*v)).collect();
        let mut in_q = self.input;
        let last = self.layers.len() - 1;
        let mut next = Vec::new();
        for (li, layer) in self.layers.iter().enumerate() {
            let in_zp = in_q.zero_point as i32;
            let multiplier = in_q.scale * layer.weights.scale / layer.output.scale;
            let out_zp = layer.output.zero_point as i32;
            // hidden layers fuse ReLU into the lower clamp
            let floor = if li == last { -128 } else { out_zp.max(-128) };
            next.clear();
            for o in 0..layer.fan_out {
                let row = &layer.weights.data[o * layer.fan_in..(o + 1) * layer.fan_in];
                let acc = row
                    .iter()
                    .zip(&act)
                    .fold(layer.bias[o], |acc, (&w, &x)| acc + w as i32 * (x as i32 - in_zp));
                let q = (acc as f64 * multiplier).round_ties_even() as i64 + out_zp as i64;
                next.push(q.clamp(floor as i64, 127) as i8);
            }
            std::mem::swap(&mut act, &mut next);
            in_q = layer.output;
        }
        Ok(act.iter().map(|&q| in_q.dequantize(q)).collect())
    }

    pub fn predict(&self, features: &[f64], threshold: f64) -> Result<Option<GestureEvent>, QuantError> {
        let (p, ev) = quantized_forward(self, features)?;
        Ok((p.top().1 >= threshold).then_some(ev).flatten())
    }

    pub fn weight_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.data.len()).sum()
    }
}

/// Quantized inference: float softmax over the dequantized logits plus the top class.
/// The event is `None` only when the top class is not a gesture id (output width > 8).
pub fn quantized_forward(
    qmodel: &QuantizedModel,
    features: &[f64],
) -> Result<(Probabilities, Option<GestureEvent>), QuantError> {
    let p = Probabilities(softmax(&qmodel.logits(features)?));
    let (i, confidence) = p.top();
    let ev = GestureLabel::new(i).map(|label| GestureEvent { label, confidence });
    Ok((p, ev))
}

/// Fraction of samples where the float and quantized argmax agree.
pub fn agreement_rate(
    params: &MlpParams,
    qmodel: &QuantizedModel,
    dataset: &Dataset,
) -> Result<f64, QuantError> {
    if dataset.is_empty() {
        return Err(QuantError::EmptyDataset);
    }
    let mut agree = 0usize;
    for s in &dataset.samples {
        let (_, pf) = forward(params, &s.features)?;
        let zq = qmodel.logits(&s.features)?;
        agree += usize::from(pf.top().0 == argmax(&zq));
    }
    Ok(agree as f64 / dataset.len() as f64)
}
