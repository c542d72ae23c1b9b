//! Float model container (`TGN1`), all fields little-endian:
//!
//! ```text
//! offset  size        field
//! 0       4           magic "TGN1"
//! 4       4           u32 width count L+1
//! 8       4·(L+1)     u32 layer widths, input first
//! ..      1           u8 hidden activation tag (0 = ReLU)
//! ..      per layer   f32 weights (fan_out × fan_in, row-major), then f32 bias (fan_out)
//! ```
//!
//! The payload after the header is exactly `4 · param_count` bytes.

use std::fs;
use std::path::Path;

use super::{Activation, Dense, LayerSpec, MlpParams, NetError};

pub const FLOAT_MAGIC: &[u8; 4] = b"TGN1";

pub(crate) fn write_spec_header(out: &mut Vec<u8>, magic: &[u8; 4], spec: &LayerSpec) {
    out.extend_from_slice(magic);
    out.extend_from_slice(&(spec.sizes().len() as u32).to_le_bytes());
    for w in spec.sizes() {
        out.extend_from_slice(&(*w as u32).to_le_bytes());
    }
    out.push(spec.hidden_activation().tag());
}

/// Little-endian cursor over a byte slice that reports truncation as a format error.
pub(crate) struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8], String> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        match end {
            Some(end) => {
                let s = &self.buf[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(format!("truncated at byte {}", self.pos)),
        }
    }

    pub(crate) fn u8(&mut self) -> Result<u8, String> {
        Ok(self.take(1)?[0])
    }

    pub(crate) fn i8(&mut self) -> Result<i8, String> {
        Ok(self.take(1)?[0] as i8)
    }

    pub(crate) fn u32(&mut self) -> Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub(crate) fn i32(&mut self) -> Result<i32, String> {
        Ok(i32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub(crate) fn f32(&mut self) -> Result<f32, String> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub(crate) fn f64(&mut self) -> Result<f64, String> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub(crate) fn finish(&self) -> Result<(), String> {
        if self.pos == self.buf.len() {
            Ok(())
        } else {
            Err(format!("{} trailing bytes", self.buf.len() - self.pos))
        }
    }

    pub(crate) fn spec_header(&mut self, magic: &[u8; 4]) -> Result<LayerSpec, String> {
        if self.take(4)? != magic {
            return Err(format!("bad magic, expected {:?}", std::str::from_utf8(magic).unwrap()));
        }
        let n = self.u32()? as usize;
        if !(2..=64).contains(&n) {
            return Err(format!("implausible width count {n}"));
        }
        let sizes = (0..n)
            .map(|_| self.u32().map(|v| v as usize))
            .collect::<Result<Vec<_>, _>>()?;
        let tag = self.u8()?;
        let act = Activation::from_tag(tag).ok_or(format!("unknown activation tag {tag}"))?;
        let spec = LayerSpec::new(sizes).map_err(|e| e.to_string())?;
        debug_assert_eq!(spec.hidden_activation(), act);
        Ok(spec)
    }
}

impl MlpParams {
    /// Serializes to `TGN1`; values are narrowed to `f32`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(32 + 4 * self.param_count());
        write_spec_header(&mut out, FLOAT_MAGIC, &self.spec);
        for v in self.iter_values() {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, NetError> {
        let mut r = Reader::new(bytes);
        let parse = |r: &mut Reader| -> Result<MlpParams, String> {
            let spec = r.spec_header(FLOAT_MAGIC)?;
            let mut layers = Vec::with_capacity(spec.layer_count());
            for (fan_in, fan_out) in spec.layer_dims() {
                let mut d = Dense::zeros(fan_in, fan_out);
                for w in d.weights.iter_mut().chain(d.bias.iter_mut()) {
                    *w = r.f32()? as f64;
                }
                layers.push(d);
            }
            r.finish()?;
            Ok(MlpParams { spec, layers })
        };
        parse(&mut r).map_err(NetError::Format)
    }
}

pub fn write_params(params: &MlpParams, path: impl AsRef<Path>) -> Result<(), NetError> {
    fs::write(path, params.to_bytes())?;
    Ok(())
}

pub fn read_params(path: impl AsRef<Path>) -> Result<MlpParams, NetError> {
    MlpParams::from_bytes(&fs::read(path)?)
}
