//! Binary checkpoints of named parameter tensors.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "PISA" | version: u8 | count: u32
//! count × { name_len: u32 | name: UTF-8 | rank: u32 | dims: rank × u32 | data: numel × f32 }
//! echo_len: u32 | echo: UTF-8
//! ```
//!
//! The trailing echo holds the resolved run configuration (JSON by
//! convention); readers treat a file that ends right after the tensors as
//! having an empty echo.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{CheckpointError, Result};
use crate::params::ParamStore;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"PISA";
pub const VERSION: u8 = 1;

/// Upper bound on a single length field, to fail fast on garbage input.
const MAX_LEN: u32 = 1 << 28;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub tensors: Vec<(String, Tensor<f32>)>,
    pub config_echo: String,
}

impl Checkpoint {
    /// Snapshot of every tensor in `store`, stored as f32.
    pub fn from_store<T: Scalar>(store: &ParamStore<T>, config_echo: impl Into<String>) -> Self {
        let tensors = store
            .entries()
            .iter()
            .map(|e| (e.name.clone(), e.tensor.cast::<f32>()))
            .collect();
        Self {
            tensors,
            config_echo: config_echo.into(),
        }
    }

    /// Snapshot of several stores in one file, each name prefixed by its part label.
    pub fn from_stores<T: Scalar>(parts: &[(&str, &ParamStore<T>)], config_echo: impl Into<String>) -> Self {
        let tensors = parts
            .iter()
            .flat_map(|(prefix, store)| {
                store
                    .entries()
                    .iter()
                    .map(move |e| (format!("{prefix}{}", e.name), e.tensor.cast::<f32>()))
            })
            .collect();
        Self {
            tensors,
            config_echo: config_echo.into(),
        }
    }

    /// Overwrites the tensors of `store` by name; every store entry must be present with the same shape.
    pub fn restore_into<T: Scalar>(&self, store: &mut ParamStore<T>) -> Result<(), CheckpointError> {
        self.restore_prefixed("", store)
    }

    /// As [`Checkpoint::restore_into`], over only the tensors named `prefix…`, prefix stripped.
    pub fn restore_prefixed<T: Scalar>(&self, prefix: &str, store: &mut ParamStore<T>) -> Result<(), CheckpointError> {
        let part: Vec<(&str, &Tensor<f32>)> = self
            .tensors
            .iter()
            .filter_map(|(n, t)| n.strip_prefix(prefix).map(|n| (n, t)))
            .collect();
        if part.len() != store.len() {
            return Err(CheckpointError::Mismatch(format!(
                "checkpoint has {} tensors{}, model has {}",
                part.len(),
                if prefix.is_empty() { String::new() } else { format!(" under {prefix}") },
                store.len()
            )));
        }
        let ids: Vec<_> = store.ids().collect();
        for id in ids {
            let name = store.entry(id).name.clone();
            let (_, saved) = part
                .iter()
                .find(|(n, _)| *n == name)
                .ok_or_else(|| CheckpointError::Mismatch(format!("missing tensor {prefix}{name}")))?;
            let target = store.get_mut(id);
            if saved.shape() != target.shape() {
                return Err(CheckpointError::Mismatch(format!(
                    "{name}: shape {:?} in checkpoint, {:?} in model",
                    saved.shape(),
                    target.shape()
                )));
            }
            *target = saved.cast();
        }
        Ok(())
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<(), CheckpointError> {
        w.write_all(MAGIC)?;
        w.write_all(&[VERSION])?;
        write_u32(w, self.tensors.len())?;
        for (name, t) in &self.tensors {
            write_u32(w, name.len())?;
            w.write_all(name.as_bytes())?;
            write_u32(w, t.rank())?;
            for &d in t.shape() {
                write_u32(w, d)?;
            }
            for v in t.data() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        write_u32(w, self.config_echo.len())?;
        w.write_all(self.config_echo.as_bytes())?;
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self, CheckpointError> {
        let mut magic = [0u8; 4];
        read_exact(r, &mut magic, "header").map_err(|e| match e {
            CheckpointError::Truncated(_) => CheckpointError::Header,
            other => other,
        })?;
        if &magic != MAGIC {
            return Err(CheckpointError::Header);
        }
        let mut version = [0u8; 1];
        read_exact(r, &mut version, "version")?;
        if version[0] != VERSION {
            return Err(CheckpointError::Version {
                found: version[0],
                expected: VERSION,
            });
        }
        let count = read_u32(r, "entry count")?;
        let mut tensors = Vec::new();
        for _ in 0..count {
            let name_len = read_u32(r, "name length")?;
            let mut name = vec![0u8; name_len];
            read_exact(r, &mut name, "tensor name")?;
            let name = String::from_utf8(name).map_err(|_| CheckpointError::Malformed("tensor name is not UTF-8".into()))?;
            let rank = read_u32(r, "rank")?;
            if rank > 8 {
                return Err(CheckpointError::Malformed(format!("{name}: rank {rank}")));
            }
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(read_u32(r, "dims")?);
            }
            let numel = shape
                .iter()
                .try_fold(1usize, |acc, &d| acc.checked_mul(d))
                .filter(|&n| n <= MAX_LEN as usize)
                .ok_or_else(|| CheckpointError::Malformed(format!("{name}: shape {shape:?} too large")))?;
            let mut bytes = vec![0u8; numel * 4];
            read_exact(r, &mut bytes, "tensor data")?;
            let data = bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            let t = Tensor::new(shape, data).map_err(|e| CheckpointError::Malformed(e.to_string()))?;
            tensors.push((name, t));
        }

        let mut first = [0u8; 1];
        let config_echo = match r.read(&mut first)? {
            0 => String::new(),
            _ => {
                let mut rest = [0u8; 3];
                read_exact(r, &mut rest, "config echo length")?;
                let len = u32::from_le_bytes([first[0], rest[0], rest[1], rest[2]]);
                if len > MAX_LEN {
                    return Err(CheckpointError::Malformed(format!("config echo length {len}")));
                }
                let mut echo = vec![0u8; len as usize];
                read_exact(r, &mut echo, "config echo")?;
                String::from_utf8(echo).map_err(|_| CheckpointError::Malformed("config echo is not UTF-8".into()))?
            }
        };
        Ok(Self { tensors, config_echo })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), CheckpointError> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CheckpointError> {
        let mut r = BufReader::new(File::open(path)?);
        Self::read_from(&mut r)
    }
}

fn write_u32<W: Write>(w: &mut W, v: usize) -> Result<(), CheckpointError> {
    let v = u32::try_from(v).map_err(|_| CheckpointError::Malformed(format!("length {v} exceeds u32")))?;
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8], what: &'static str) -> Result<(), CheckpointError> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => CheckpointError::Truncated(what),
        _ => CheckpointError::Io(e),
    })
}

fn read_u32<R: Read>(r: &mut R, what: &'static str) -> Result<usize, CheckpointError> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b, what)?;
    let v = u32::from_le_bytes(b);
    if v > MAX_LEN {
        return Err(CheckpointError::Malformed(format!("{what} {v}")));
    }
    Ok(v as usize)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{PisaConfig, PisaModel};

    fn bytes_of(c: &Checkpoint) -> Vec<u8> {
        let mut buf = Vec::new();
        c.write_to(&mut buf).unwrap();
        buf
    }

    #[test]
    fn round_trip_is_bitwise() {
        let m = PisaModel::<f32>::new(PisaConfig::new(6, 16, 16), 3).unwrap();
        let c = Checkpoint::from_store(&m.params, r#"{"seed":3}"#);
        let back = Checkpoint::read_from(&mut bytes_of(&c).as_slice()).unwrap();
        assert_eq!(back, c);

        let mut other = PisaModel::<f32>::new(PisaConfig::new(6, 16, 16), 4).unwrap();
        assert_ne!(other.params, m.params);
        back.restore_into(&mut other.params).unwrap();
        for (a, b) in other.params.entries().iter().zip(m.params.entries()) {
            let bits = |t: &Tensor<f32>| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(&a.tensor), bits(&b.tensor), "{}", a.name);
        }
    }

    #[test]
    fn hand_written_layout() {
        let c = Checkpoint {
            tensors: vec![("w".into(), Tensor::matrix(1, 2, vec![1.0f32, -2.0]).unwrap())],
            config_echo: "{}".into(),
        };
        let mut expected = b"PISA".to_vec();
        expected.push(1);
        expected.extend(1u32.to_le_bytes());
        expected.extend(1u32.to_le_bytes());
        expected.push(b'w');
        expected.extend(2u32.to_le_bytes());
        expected.extend(1u32.to_le_bytes());
        expected.extend(2u32.to_le_bytes());
        expected.extend(1.0f32.to_le_bytes());
        expected.extend((-2.0f32).to_le_bytes());
        expected.extend(2u32.to_le_bytes());
        expected.extend(b"{}");
        assert_eq!(bytes_of(&c), expected);
    }

    #[test]
    fn missing_echo_reads_as_empty() {
        let c = Checkpoint {
            tensors: vec![("b".into(), Tensor::vector(vec![0.5f32]))],
            config_echo: String::new(),
        };
        let mut buf = bytes_of(&c);
        buf.truncate(buf.len() - 4);
        assert_eq!(Checkpoint::read_from(&mut buf.as_slice()).unwrap(), c);
    }

    #[test]
    fn corrupt_inputs_give_distinct_errors() {
        let m = PisaModel::<f32>::new(PisaConfig::new(2, 8, 4), 0).unwrap();
        let good = bytes_of(&Checkpoint::from_store(&m.params, "{}"));

        let mut foreign = good.clone();
        foreign[..4].copy_from_slice(b"NOPE");
        assert!(matches!(Checkpoint::read_from(&mut foreign.as_slice()), Err(CheckpointError::Header)));

        let mut versioned = good.clone();
        versioned[4] = 9;
        assert!(matches!(
            Checkpoint::read_from(&mut versioned.as_slice()),
            Err(CheckpointError::Version { found: 9, expected: 1 })
        ));

        for cut in [5, 12, good.len() / 2, good.len() - 3] {
            let r = Checkpoint::read_from(&mut &good[..cut]);
            assert!(matches!(r, Err(CheckpointError::Truncated(_))), "cut at {cut}: {r:?}");
        }
        assert!(matches!(Checkpoint::read_from(&mut &good[..2]), Err(CheckpointError::Header)));
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let small = PisaModel::<f32>::new(PisaConfig::new(2, 8, 4), 0).unwrap();
        let mut big = PisaModel::<f32>::new(PisaConfig::new(2, 16, 4), 0).unwrap();
        let c = Checkpoint::from_store(&small.params, "");
        assert!(matches!(c.restore_into(&mut big.params), Err(CheckpointError::Mismatch(_))));
    }

    #[test]
    fn prefixed_parts_restore_independently() {
        let a = PisaModel::<f32>::new(PisaConfig::new(2, 8, 4), 0).unwrap();
        let b = PisaModel::<f32>::new(PisaConfig::new(3, 4, 4), 1).unwrap();
        let c = Checkpoint::from_stores(&[("a.", &a.params), ("b.", &b.params)], "");
        assert_eq!(c.tensors.len(), a.params.len() + b.params.len());
        let mut a2 = PisaModel::<f32>::new(PisaConfig::new(2, 8, 4), 5).unwrap();
        let mut b2 = PisaModel::<f32>::new(PisaConfig::new(3, 4, 4), 6).unwrap();
        c.restore_prefixed("a.", &mut a2.params).unwrap();
        c.restore_prefixed("b.", &mut b2.params).unwrap();
        assert_eq!(a2.params, a.params);
        assert_eq!(b2.params, b.params);
        assert!(matches!(c.restore_into(&mut a2.params), Err(CheckpointError::Mismatch(_))));
    }
}
