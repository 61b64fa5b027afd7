//! Versioned binary checkpoint container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic      8 bytes  "NWPCKPT\0"
//! version    u32
//! config     u32 length + UTF-8 JSON of ModelConfig
//! n_tensors  u32
//! index      per tensor: u16 name length, name, u32 rows, u32 cols, u64 offset (in floats)
//! n_floats   u64
//! data       n_floats × f32
//! crc32      u32 over every preceding byte
//! ```

use std::fs;
use std::path::Path;

use super::config::ModelConfig;
use super::params::{expected_shapes, shape_layout, ModelParameters, Weights};
use crate::error::{Error, Result};
use crate::tensor::Mat;

pub const MAGIC: &[u8; 8] = b"NWPCKPT\0";
pub const SCHEMA_VERSION: u32 = 1;

pub fn encode_checkpoint(params: &ModelParameters) -> Result<Vec<u8>> {
    params.validate()?;
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&SCHEMA_VERSION.to_le_bytes());
    let json = serde_json::to_vec(&params.config).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    buf.extend_from_slice(&(json.len() as u32).to_le_bytes());
    buf.extend_from_slice(&json);
    let mut tensors = Vec::new();
    params.weights.visit(&mut |n, m| tensors.push((n, m)));
    buf.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    let mut offset = 0u64;
    for (name, m) in &tensors {
        buf.extend_from_slice(&(name.len() as u16).to_le_bytes());
        buf.extend_from_slice(name.as_bytes());
        buf.extend_from_slice(&(m.rows() as u32).to_le_bytes());
        buf.extend_from_slice(&(m.cols() as u32).to_le_bytes());
        buf.extend_from_slice(&offset.to_le_bytes());
        offset += m.data().len() as u64;
    }
    buf.extend_from_slice(&offset.to_le_bytes());
    for (_, m) in &tensors {
        for &x in m.data() {
            buf.extend_from_slice(&(x as f32).to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&buf);
    buf.extend_from_slice(&crc.to_le_bytes());
    Ok(buf)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], String> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(e) => {
                let s = &self.bytes[self.pos..e];
                self.pos = e;
                Ok(s)
            }
            None => Err(format!("truncated at byte {}", self.pos)),
        }
    }

    fn u16(&mut self) -> std::result::Result<u16, String> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("len")))
    }

    fn u32(&mut self) -> std::result::Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("len")))
    }

    fn u64(&mut self) -> std::result::Result<u64, String> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("len")))
    }
}

/// Parses a checkpoint image; `origin` labels errors.
pub fn decode_checkpoint(bytes: &[u8], origin: &Path) -> Result<ModelParameters> {
    let corrupt = |message: String| Error::Corrupt {
        path: origin.to_path_buf(),
        message,
    };
    let mut r = Reader { bytes, pos: 0 };
    let magic = r.take(8).map_err(corrupt)?;
    if magic != MAGIC {
        return Err(corrupt("bad magic bytes".into()));
    }
    let version = r.u32().map_err(corrupt)?;
    if version != SCHEMA_VERSION {
        return Err(Error::VersionMismatch {
            found: version,
            expected: SCHEMA_VERSION,
        });
    }
    if bytes.len() < r.pos + 4 {
        return Err(corrupt("truncated header".into()));
    }
    let body_len = bytes.len() - 4;
    let stored_crc = u32::from_le_bytes(bytes[body_len..].try_into().expect("len"));
    if crc32fast::hash(&bytes[..body_len]) != stored_crc {
        return Err(corrupt("checksum mismatch (truncated or damaged file)".into()));
    }
    let mut r = Reader {
        bytes: &bytes[..body_len],
        pos: r.pos,
    };
    let json_len = r.u32().map_err(corrupt)? as usize;
    let json = r.take(json_len).map_err(corrupt)?;
    let config: ModelConfig =
        serde_json::from_slice(json).map_err(|e| corrupt(format!("hyperparameter block: {e}")))?;
    config.validate().map_err(|e| corrupt(e.to_string()))?;
    let n = r.u32().map_err(corrupt)? as usize;
    let expected = expected_shapes(&config);
    if n != expected.len() {
        return Err(corrupt(format!("{n} tensors, configuration implies {}", expected.len())));
    }
    let mut index = Vec::with_capacity(n);
    for (exp_name, exp_shape) in &expected {
        let len = r.u16().map_err(corrupt)? as usize;
        let name = std::str::from_utf8(r.take(len).map_err(corrupt)?)
            .map_err(|_| corrupt("tensor name is not UTF-8".into()))?
            .to_string();
        let rows = r.u32().map_err(corrupt)? as usize;
        let cols = r.u32().map_err(corrupt)? as usize;
        let offset = r.u64().map_err(corrupt)? as usize;
        if &name != exp_name || (rows, cols) != *exp_shape {
            return Err(Error::DimensionMismatch(format!(
                "tensor {name} ({rows}, {cols}) where {exp_name} {exp_shape:?} was expected"
            )));
        }
        index.push((rows, cols, offset));
    }
    let n_floats = r.u64().map_err(corrupt)? as usize;
    let raw = r.take(n_floats.checked_mul(4).ok_or_else(|| corrupt("size overflow".into()))?)
        .map_err(corrupt)?;
    if r.pos != body_len {
        return Err(corrupt("trailing bytes after tensor data".into()));
    }
    let floats: Vec<f64> = raw
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("len")) as f64)
        .collect();
    let mut mats = Vec::with_capacity(n);
    for (rows, cols, offset) in index {
        let end = offset + rows * cols;
        if end > floats.len() {
            return Err(corrupt("tensor extends past data block".into()));
        }
        mats.push(Mat::from_vec(rows, cols, floats[offset..end].to_vec())?);
    }
    let weights = Weights::from_flat(&shape_layout(&config), mats)?;
    let params = ModelParameters { config, weights };
    params.validate()?;
    Ok(params)
}

pub fn save_checkpoint(params: &ModelParameters, path: &Path) -> Result<()> {
    let bytes = encode_checkpoint(params)?;
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, &bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<ModelParameters> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes, path)
}

/// Loads a checkpoint and checks its architecture against `expected`.
pub fn load_checkpoint_for(path: &Path, expected: &ModelConfig) -> Result<ModelParameters> {
    let params = load_checkpoint(path)?;
    check_architecture(&params.config, expected)?;
    Ok(params)
}

/// Compares every shape-determining hyperparameter.
pub fn check_architecture(found: &ModelConfig, expected: &ModelConfig) -> Result<()> {
    let pairs = [
        ("hidden_dim", found.hidden_dim, expected.hidden_dim),
        ("heads", found.heads, expected.heads),
        ("encoder_layers", found.encoder_layers, expected.encoder_layers),
        ("decoder_layers", found.decoder_layers, expected.decoder_layers),
        ("ff_mult", found.ff_mult, expected.ff_mult),
        ("sh_degree", found.sh_degree, expected.sh_degree),
        ("siren_hidden", found.siren_hidden, expected.siren_hidden),
        ("extra_channels", found.extra_channels, expected.extra_channels),
        ("platform_encoding", usize::from(found.platform_encoding), usize::from(expected.platform_encoding)),
        ("gfs_skip", usize::from(found.gfs_skip), usize::from(expected.gfs_skip)),
        (
            "obs_order_embedding",
            usize::from(found.obs_order_embedding),
            usize::from(expected.obs_order_embedding),
        ),
    ];
    for (what, f, e) in pairs {
        if f != e {
            return Err(Error::ConfigMismatch {
                what: what.into(),
                found: f,
                expected: e,
            });
        }
    }
    Ok(())
}
