//! Binary weight container.
//!
//! All integers are little-endian `u32`:
//!
//! ```text
//! "CVHW" | version | channels | num_blocks | scale | tensor_count
//! per tensor: path_len | path (UTF-8) | rank | dims[rank] | f32 LE × Π dims
//! CRC-32 (IEEE) of every preceding byte
//! ```

use std::collections::HashSet;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result, WeightFileError};
use super::image::write_atomically;
use crate::model::{expected_parameters, ModelConfig};
use crate::params::ParameterStore;
use crate::tensor::ParamTensor;

pub const MAGIC: [u8; 4] = *b"CVHW";
pub const FORMAT_VERSION: u32 = 1;
const MAX_RANK: usize = 8;

fn push_u32(buf: &mut Vec<u8>, v: usize) {
    buf.extend_from_slice(&(v as u32).to_le_bytes());
}

/// Serializes tensors in the canonical parameter order of `config`.
pub fn encode_weights(config: &ModelConfig, store: &ParameterStore) -> Result<Vec<u8>> {
    config.validate()?;
    let layout = expected_parameters(config);
    store.validate(&layout)?;

    let mut buf = Vec::with_capacity(4 * store.scalar_count() + 64 * layout.len());
    buf.extend_from_slice(&MAGIC);
    push_u32(&mut buf, FORMAT_VERSION as usize);
    push_u32(&mut buf, config.channels);
    push_u32(&mut buf, config.num_blocks);
    push_u32(&mut buf, config.scale);
    push_u32(&mut buf, layout.len());
    for (path, _) in &layout {
        let t = store.get(path).expect("validated");
        push_u32(&mut buf, path.len());
        buf.extend_from_slice(path.as_bytes());
        push_u32(&mut buf, t.dims().len());
        for &d in t.dims() {
            push_u32(&mut buf, d);
        }
        for v in t.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&buf);
    buf.extend_from_slice(&crc.to_le_bytes());
    Ok(buf)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], WeightFileError> {
        if self.bytes.len() - self.pos < n {
            return Err(WeightFileError::Truncated(format!(
                "needed {n} bytes for {what} at offset {}, {} left",
                self.pos,
                self.bytes.len() - self.pos
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32, WeightFileError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

/// Parses and fully validates a weight file image. Structure is checked
/// first (so a short payload reports truncation), then the checksum, then
/// the parameter set against the stored configuration.
pub fn decode_weights(bytes: &[u8]) -> Result<(ModelConfig, ParameterStore)> {
    const CRC_LEN: usize = 4;
    if bytes.len() < 4 {
        return Err(WeightFileError::Truncated("file shorter than the magic".into()).into());
    }
    let magic: [u8; 4] = bytes[..4].try_into().unwrap();
    if magic != MAGIC {
        return Err(WeightFileError::BadMagic(magic).into());
    }
    let body_end = bytes.len().saturating_sub(CRC_LEN).max(4);
    let mut cur = Cursor {
        bytes: &bytes[..body_end],
        pos: 4,
    };
    let version = cur.u32("version")?;
    if version != FORMAT_VERSION {
        return Err(WeightFileError::UnsupportedVersion(version).into());
    }
    let channels = cur.u32("channels")? as usize;
    let num_blocks = cur.u32("num_blocks")? as usize;
    let scale = cur.u32("scale")? as usize;
    let count = cur.u32("tensor count")? as usize;

    let mut entries = Vec::with_capacity(count.min(4096));
    for i in 0..count {
        let what = |field: &str| format!("{field} of tensor {i}");
        let path_len = cur.u32(&what("path length"))? as usize;
        let path = std::str::from_utf8(cur.take(path_len, &what("path"))?)
            .map_err(|_| WeightFileError::Malformed(format!("tensor {i} path is not UTF-8")))?
            .to_string();
        let rank = cur.u32(&what("rank"))? as usize;
        if rank == 0 || rank > MAX_RANK {
            return Err(WeightFileError::Malformed(format!("tensor `{path}` has rank {rank}")).into());
        }
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(cur.u32(&what("dims"))? as usize);
        }
        let n = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .and_then(|n| n.checked_mul(4))
            .ok_or_else(|| WeightFileError::Malformed(format!("tensor `{path}` is too large")))?;
        let raw = cur.take(n, &what("data"))?;
        let data = raw
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
            .collect();
        entries.push((path, dims, data));
    }
    if bytes.len() < cur.pos + CRC_LEN {
        return Err(WeightFileError::Truncated("missing CRC trailer".into()).into());
    }
    if cur.pos != body_end {
        return Err(WeightFileError::Malformed(format!(
            "{} unexpected bytes before the CRC trailer",
            body_end - cur.pos
        ))
        .into());
    }
    let stored = u32::from_le_bytes(bytes[body_end..].try_into().unwrap());
    let computed = crc32fast::hash(&bytes[..body_end]);
    if stored != computed {
        return Err(WeightFileError::CrcMismatch { stored, computed }.into());
    }

    let config = ModelConfig::new(channels, num_blocks, scale)
        .map_err(|e| WeightFileError::Malformed(format!("config block: {e}")))?;
    let mut store = ParameterStore::new();
    let mut seen = HashSet::new();
    for (path, dims, data) in entries {
        if !seen.insert(path.clone()) {
            return Err(WeightFileError::Malformed(format!("duplicate tensor `{path}`")).into());
        }
        store.insert(path, ParamTensor::new(dims, data)?);
    }
    store.validate(&expected_parameters(&config))?;
    Ok((config, store))
}

pub fn write_weights(config: &ModelConfig, store: &ParameterStore, path: impl AsRef<Path>) -> Result<()> {
    let bytes = encode_weights(config, store)?;
    write_atomically(path.as_ref(), |out| out.write_all(&bytes))
}

pub fn read_weights(path: impl AsRef<Path>) -> Result<(ModelConfig, ParameterStore)> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_weights(&bytes)
}
