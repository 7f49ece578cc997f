//! Binary checkpoint format.
//!
//! ```text
//! magic   b"MFKCKPT\0"
//! u32     format version
//! u64     config JSON length, then the JSON bytes
//! u64     tensor count
//! per tensor:
//!   u32 name length, name bytes (UTF-8)
//!   u32 ndim, ndim x u64 dims
//!   prod(dims) x f64 values
//! ```
//!
//! All integers and floats are little-endian.

use std::io::{Read, Write};
use std::path::Path;

use super::config::ModelConfig;
use super::network::SocialTgcn;
use super::params::Params;
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"MFKCKPT\0";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn write_checkpoint<W: Write>(model: &SocialTgcn, mut w: W) -> std::io::Result<()> {
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    let cfg = serde_json::to_vec(&model.config).expect("config serialises");
    w.write_all(&(cfg.len() as u64).to_le_bytes())?;
    w.write_all(&cfg)?;
    let tensors = model.params.tensors();
    w.write_all(&(tensors.len() as u64).to_le_bytes())?;
    for t in tensors {
        w.write_all(&(t.name.len() as u32).to_le_bytes())?;
        w.write_all(t.name.as_bytes())?;
        w.write_all(&(t.shape.len() as u32).to_le_bytes())?;
        for d in &t.shape {
            w.write_all(&(*d as u64).to_le_bytes())?;
        }
        for v in t.values {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Format(format!(
                "checkpoint truncated at byte {}",
                self.pos
            )));
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn len(&mut self) -> Result<usize> {
        let v = self.u64()?;
        usize::try_from(v).map_err(|_| Error::Format(format!("length {v} out of range")))
    }
}

pub fn parse_checkpoint(bytes: &[u8]) -> Result<SocialTgcn> {
    let mut c = Cursor { buf: bytes, pos: 0 };
    if c.take(8).ok() != Some(&CHECKPOINT_MAGIC[..]) {
        return Err(Error::Format("not a checkpoint file (bad magic)".into()));
    }
    let version = c.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Compatibility(format!(
            "checkpoint format version {version}, expected {CHECKPOINT_VERSION}"
        )));
    }
    let cfg_len = c.len()?;
    let config: ModelConfig = serde_json::from_slice(c.take(cfg_len)?)
        .map_err(|e| Error::Format(format!("checkpoint config: {e}")))?;
    config.validate()?;
    let mut params = Params::zeros(&config);
    let expected: Vec<(String, Vec<usize>)> = params
        .tensors()
        .into_iter()
        .map(|t| (t.name, t.shape))
        .collect();
    let count = c.len()?;
    if count != expected.len() {
        return Err(Error::Compatibility(format!(
            "checkpoint holds {count} tensors, configuration needs {}",
            expected.len()
        )));
    }
    for ((name, shape), dst) in expected.iter().zip(params.slices_mut()) {
        let name_len = c.u32()? as usize;
        let got_name = std::str::from_utf8(c.take(name_len)?)
            .map_err(|_| Error::Format("tensor name is not UTF-8".into()))?;
        let ndim = c.u32()? as usize;
        let dims = (0..ndim).map(|_| c.len()).collect::<Result<Vec<_>>>()?;
        if got_name != name || &dims != shape {
            return Err(Error::Compatibility(format!(
                "tensor {got_name} {dims:?} does not match expected {name} {shape:?}"
            )));
        }
        let raw = c.take(dst.len() * 8)?;
        for (v, b) in dst.iter_mut().zip(raw.chunks_exact(8)) {
            *v = f64::from_le_bytes(b.try_into().unwrap());
        }
    }
    if c.pos != bytes.len() {
        return Err(Error::Format("trailing bytes after last tensor".into()));
    }
    SocialTgcn::new(config, params)
}

pub fn save_checkpoint(model: &SocialTgcn, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_checkpoint(model, std::io::BufWriter::new(file)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<SocialTgcn> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    parse_checkpoint(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ModelConfig {
        ModelConfig {
            psm_gcn_layers: 3,
            psm_hidden: 8,
            encoder_layers: 1,
            encoder_hidden: 8,
            decoder_tcn_layers: 2,
            ..Default::default()
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let model = SocialTgcn::build(small(), 3).unwrap();
        let mut buf = Vec::new();
        write_checkpoint(&model, &mut buf).unwrap();
        let back = parse_checkpoint(&buf).unwrap();
        assert_eq!(back, model);
    }

    #[test]
    fn rejects_corruption() {
        let model = SocialTgcn::build(small(), 3).unwrap();
        let mut buf = Vec::new();
        write_checkpoint(&model, &mut buf).unwrap();
        assert!(matches!(parse_checkpoint(&buf[..buf.len() - 3]), Err(Error::Format(_))));
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(parse_checkpoint(&bad), Err(Error::Format(_))));
        let mut old = buf.clone();
        old[8..12].copy_from_slice(&7u32.to_le_bytes());
        assert!(matches!(parse_checkpoint(&old), Err(Error::Compatibility(_))));
    }
}
