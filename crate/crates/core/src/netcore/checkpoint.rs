//! `NMC1` checkpoints: magic, u32 length + canonical JSON of the
//! [`NetworkSpec`], then for every layer in order a u32 value count followed
//! by that many f32 values (weights, then biases). All integers and floats
//! are little-endian.

use std::fs;
use std::path::Path;

use super::{LayerParams, NetworkSpec, ParamSet, Tensor};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"NMC1";

pub fn encode_checkpoint(spec: &NetworkSpec, params: &ParamSet) -> Result<Vec<u8>> {
    let template = ParamSet::zeros(spec)?;
    if !template.same_shape(params) {
        return Err(Error::Shape("parameters do not match the network specification".into()));
    }
    let desc = serde_json::to_vec(spec).expect("network spec always serializes");
    let mut buf = Vec::with_capacity(8 + desc.len() + params.num_values() * 4 + spec.layers.len() * 4);
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    buf.extend_from_slice(&(desc.len() as u32).to_le_bytes());
    buf.extend_from_slice(&desc);
    for layer in params.layers() {
        let count = layer.weight.len() + layer.bias.len();
        buf.extend_from_slice(&(count as u32).to_le_bytes());
        for &v in layer.weight.values().iter().chain(layer.bias.values()) {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    Ok(buf)
}

pub fn decode_checkpoint(bytes: &[u8]) -> std::result::Result<(NetworkSpec, ParamSet), String> {
    let mut cursor = Cursor { bytes, pos: 0 };
    if cursor.take(4)? != CHECKPOINT_MAGIC {
        return Err("missing NMC1 magic".into());
    }
    let desc_len = cursor.u32()? as usize;
    let spec: NetworkSpec =
        serde_json::from_slice(cursor.take(desc_len)?).map_err(|e| format!("bad network description: {e}"))?;
    let template = ParamSet::zeros(&spec).map_err(|e| e.to_string())?;
    let mut layers = Vec::with_capacity(template.layers().len());
    for (i, t) in template.layers().iter().enumerate() {
        let count = cursor.u32()? as usize;
        let (nw, nb) = (t.weight.len(), t.bias.len());
        if count != nw + nb {
            return Err(format!("layer {i} stores {count} values, expected {}", nw + nb));
        }
        let mut values = Vec::with_capacity(count);
        for _ in 0..count {
            values.push(f32::from_le_bytes(cursor.take(4)?.try_into().unwrap()) as f64);
        }
        let bias = values.split_off(nw);
        layers.push(LayerParams {
            weight: Tensor::new(t.weight.shape().to_vec(), values).map_err(|e| e.to_string())?,
            bias: Tensor::new(t.bias.shape().to_vec(), bias).map_err(|e| e.to_string())?,
        });
    }
    if cursor.pos != bytes.len() {
        return Err(format!("{} trailing bytes", bytes.len() - cursor.pos));
    }
    let params = ParamSet::from_layers(&spec, layers).map_err(|e| e.to_string())?;
    Ok((spec, params))
}

pub fn write_checkpoint(path: &Path, spec: &NetworkSpec, params: &ParamSet) -> Result<()> {
    let bytes = encode_checkpoint(spec, params)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_checkpoint(path: &Path) -> Result<(NetworkSpec, ParamSet)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes).map_err(|reason| Error::format(path, reason))
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], String> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| format!("truncated at byte {}", self.pos))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> std::result::Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}
