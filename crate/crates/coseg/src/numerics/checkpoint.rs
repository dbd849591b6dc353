//! Binary checkpoint format for training state.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic    8 bytes  "COSEGCK1"
//! version  u32
//! confhash u64      fingerprint of the canonical config string
//! nblocks  u64
//! block*   name(u32 len + utf8) tag(u8: 0 vec, 1 mat) dims(u64 / u64+u64) f64 data
//! ```
//!
//! Blocks hold the model parameters under their own names, optimizer velocity
//! under `velocity/<name>`, and scalar training metadata under `meta/<key>`.
//! Everything a resumed run needs is in the file; nothing is implicit.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{CosegError, Result};

use super::optim::Velocity;
use super::params::ParamSet;
use super::tensor::{Shape, Tensor};

const MAGIC: &[u8; 8] = b"COSEGCK1";
const VERSION: u32 = 1;

/// Scalar state carried across a resume, stored as `meta/` blocks.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainMeta {
    /// Epochs fully completed before the save.
    pub epoch: u64,
    pub lr: f64,
    pub best_ppl: f64,
    /// Consecutive epochs without validation improvement.
    pub bad_epochs: u64,
    pub seed: u64,
}

#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub config_hash: u64,
    pub params: ParamSet,
    pub velocity: Velocity,
    pub meta: TrainMeta,
}

/// First eight bytes of SHA-256 over the canonical config string.
pub fn config_fingerprint(canonical: &str) -> u64 {
    let digest = Sha256::digest(canonical.as_bytes());
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

fn corrupt(path: &Path, message: impl Into<String>) -> CosegError {
    CosegError::Checkpoint(format!("{}: {}", path.display(), message.into()))
}

fn write_block(out: &mut impl Write, name: &str, shape: Shape, data: &[f64]) -> std::io::Result<()> {
    out.write_all(&(name.len() as u32).to_le_bytes())?;
    out.write_all(name.as_bytes())?;
    match shape {
        Shape::Vector { len } => {
            out.write_all(&[0u8])?;
            out.write_all(&(len as u64).to_le_bytes())?;
        }
        Shape::Matrix { rows, cols } => {
            out.write_all(&[1u8])?;
            out.write_all(&(rows as u64).to_le_bytes())?;
            out.write_all(&(cols as u64).to_le_bytes())?;
        }
    }
    for v in data {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn save_checkpoint(path: &Path, ck: &Checkpoint) -> Result<()> {
    let io_err = |e| CosegError::io(path, e);
    let file = File::create(path).map_err(io_err)?;
    let mut out = BufWriter::new(file);

    let meta_blocks: [(&str, f64); 5] = [
        ("meta/bad_epochs", ck.meta.bad_epochs as f64),
        ("meta/best_ppl", ck.meta.best_ppl),
        ("meta/epoch", ck.meta.epoch as f64),
        ("meta/lr", ck.meta.lr),
        ("meta/seed", ck.meta.seed as f64),
    ];
    let nblocks = ck.params.len() + ck.velocity.len() + meta_blocks.len();

    (|| -> std::io::Result<()> {
        out.write_all(MAGIC)?;
        out.write_all(&VERSION.to_le_bytes())?;
        out.write_all(&ck.config_hash.to_le_bytes())?;
        out.write_all(&(nblocks as u64).to_le_bytes())?;
        for (name, tensor) in ck.params.iter() {
            write_block(&mut out, name, tensor.shape(), tensor.data())?;
        }
        for (name, v) in &ck.velocity {
            let full = format!("velocity/{name}");
            write_block(&mut out, &full, Shape::Vector { len: v.len() }, v)?;
        }
        for (name, v) in meta_blocks {
            write_block(&mut out, name, Shape::Vector { len: 1 }, &[v])?;
        }
        out.flush()
    })()
    .map_err(io_err)
}

struct Reader<'a> {
    inner: BufReader<File>,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut buf = [0u8; N];
        self.inner
            .read_exact(&mut buf)
            .map_err(|_| corrupt(self.path, "truncated checkpoint"))?;
        Ok(buf)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes()?))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes()?))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes()?))
    }

    fn name(&mut self) -> Result<String> {
        let len = self.u32()? as usize;
        if len > 4096 {
            return Err(corrupt(self.path, format!("implausible block name length {len}")));
        }
        let mut buf = vec![0u8; len];
        self.inner
            .read_exact(&mut buf)
            .map_err(|_| corrupt(self.path, "truncated block name"))?;
        String::from_utf8(buf).map_err(|_| corrupt(self.path, "block name is not UTF-8"))
    }
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let file = File::open(path).map_err(|e| CosegError::io(path, e))?;
    let mut r = Reader { inner: BufReader::new(file), path };

    let magic: [u8; 8] = r.bytes()?;
    if &magic != MAGIC {
        return Err(corrupt(path, "bad magic, not a checkpoint file"));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(corrupt(path, format!("unsupported version {version}, expected {VERSION}")));
    }
    let config_hash = r.u64()?;
    let nblocks = r.u64()? as usize;

    let mut params = ParamSet::new();
    let mut velocity = Velocity::new();
    let mut meta_values: std::collections::BTreeMap<String, f64> = Default::default();

    for _ in 0..nblocks {
        let name = r.name()?;
        let tag: [u8; 1] = r.bytes()?;
        let shape = match tag[0] {
            0 => Shape::Vector { len: r.u64()? as usize },
            1 => Shape::Matrix { rows: r.u64()? as usize, cols: r.u64()? as usize },
            t => return Err(corrupt(path, format!("unknown shape tag {t}"))),
        };
        let numel = shape.numel();
        if numel > 1 << 30 {
            return Err(corrupt(path, format!("implausible block size {numel}")));
        }
        let mut data = Vec::with_capacity(numel);
        for _ in 0..numel {
            let v = r.f64()?;
            if !v.is_finite() {
                return Err(corrupt(path, format!("non-finite value in block {name:?}")));
            }
            data.push(v);
        }
        if let Some(key) = name.strip_prefix("meta/") {
            if numel != 1 {
                return Err(corrupt(path, format!("meta block {name:?} must hold one value")));
            }
            meta_values.insert(key.to_string(), data[0]);
        } else if let Some(key) = name.strip_prefix("velocity/") {
            velocity.insert(key.to_string(), data);
        } else {
            let tensor = match shape {
                Shape::Vector { .. } => Tensor::vector(data),
                Shape::Matrix { rows, cols } => Tensor::matrix(rows, cols, data),
            };
            params.insert(name, tensor);
        }
    }

    let mut meta_of = |key: &str| -> Result<f64> {
        meta_values
            .remove(key)
            .ok_or_else(|| corrupt(path, format!("missing meta/{key}")))
    };
    let meta = TrainMeta {
        bad_epochs: meta_of("bad_epochs")? as u64,
        best_ppl: meta_of("best_ppl")?,
        epoch: meta_of("epoch")? as u64,
        lr: meta_of("lr")?,
        seed: meta_of("seed")? as u64,
    };

    for (name, v) in &velocity {
        if !params.contains(name) {
            return Err(corrupt(path, format!("velocity for unknown parameter {name:?}")));
        }
        if params.get(name).numel() != v.len() {
            return Err(corrupt(path, format!("velocity length mismatch for {name:?}")));
        }
    }

    Ok(Checkpoint { config_hash, params, velocity, meta })
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn sample() -> Checkpoint {
        let mut params = ParamSet::new();
        params.insert("embed", Tensor::matrix(3, 2, vec![0.1, -0.2, 0.3, 0.4, -0.5, 0.6]));
        params.insert("out.b", Tensor::vector(vec![1.5, -2.5]));
        let mut velocity = Velocity::new();
        velocity.insert("embed".to_string(), vec![0.01; 6]);
        velocity.insert("out.b".to_string(), vec![-0.02, 0.03]);
        Checkpoint {
            config_hash: config_fingerprint("h=4;v=11"),
            params,
            velocity,
            meta: TrainMeta { epoch: 7, lr: 0.05, best_ppl: 12.25, bad_epochs: 2, seed: 99 },
        }
    }

    #[test]
    fn roundtrip_preserves_everything() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("model.ck");
        let ck = sample();
        save_checkpoint(&path, &ck).unwrap();
        let back = load_checkpoint(&path).unwrap();

        assert_eq!(back.config_hash, ck.config_hash);
        assert_eq!(back.meta, ck.meta);
        for (name, tensor) in ck.params.iter() {
            assert_eq!(back.params.get(name).shape(), tensor.shape());
            assert_eq!(back.params.get(name).data(), tensor.data());
        }
        assert_eq!(back.velocity, ck.velocity);
    }

    #[test]
    fn bad_magic_is_rejected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("model.ck");
        std::fs::write(&path, b"NOTACKPTxxxxxxxxxxxxxxxx").unwrap();
        let err = load_checkpoint(&path).unwrap_err();
        assert!(err.to_string().contains("magic"), "{err}");
    }

    #[test]
    fn truncated_file_is_rejected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("model.ck");
        save_checkpoint(&path, &sample()).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 9]).unwrap();
        let err = load_checkpoint(&path).unwrap_err();
        assert!(err.to_string().contains("truncated"), "{err}");
    }

    #[test]
    fn wrong_version_is_rejected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("model.ck");
        save_checkpoint(&path, &sample()).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[8] = 9;
        std::fs::write(&path, &bytes).unwrap();
        let err = load_checkpoint(&path).unwrap_err();
        assert!(err.to_string().contains("version"), "{err}");
    }

    #[test]
    fn fingerprint_is_stable_and_discriminating() {
        assert_eq!(config_fingerprint("a"), config_fingerprint("a"));
        assert_ne!(config_fingerprint("a"), config_fingerprint("b"));
    }
}
