//! Named parameter storage and the `.cwts` file format.
//!
//! Layout, all integers unsigned 32-bit little-endian:
//!
//! ```text
//! magic    "CWTS"
//! version  1
//! count    number of entries
//! entry*   name_len, name (ASCII), rank, extent[rank], payload
//! crc32    CRC-32 (IEEE) of every preceding byte
//! ```
//!
//! Tensor payloads are `product(extents)` little-endian `f32` values. The
//! reserved entry `__meta__` (present only when metadata is non-empty, always
//! first) has rank 1, its extent is a byte count, and its payload is UTF-8
//! text of `key=value` lines, each terminated by `\n`, sorted by key.
//!
//! Loading checks, in order: minimum length, checksum, magic, version, then
//! the entry structure.
//!
//! # Fixture generator
//!
//! [`random_init`] draws from a 64-bit linear congruential generator:
//! `state = state * 6364136223846793005 + 1442695040888963407 (mod 2^64)`,
//! starting from `state = seed`. Each draw advances the state once and maps
//! the top 53 bits to `u = (state >> 11) / 2^53`; the stored value is
//! `((2u - 1) * 0.1)` computed in `f64` and rounded to `f32`. Tensors are
//! filled in the order given, elements in row-major order, from one stream.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const MAGIC: [u8; 4] = *b"CWTS";
pub const VERSION: u32 = 1;
pub const META_ENTRY: &str = "__meta__";
pub const INIT_BOUND: f64 = 0.1;

const LCG_MULTIPLIER: u64 = 6364136223846793005;
const LCG_INCREMENT: u64 = 1442695040888963407;

/// The fixture random generator documented at module level.
#[derive(Clone, Debug)]
pub struct Lcg {
    state: u64,
}

impl Lcg {
    pub fn new(seed: u64) -> Self {
        Lcg { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self
            .state
            .wrapping_mul(LCG_MULTIPLIER)
            .wrapping_add(LCG_INCREMENT);
        self.state
    }

    /// Uniform in `[0, 1)`.
    pub fn next_unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    /// Uniform in `[-bound, bound)`, rounded to `f32`.
    pub fn next_symmetric(&mut self, bound: f32) -> f32 {
        ((2.0 * self.next_unit() - 1.0) * bound as f64) as f32
    }

    /// Uniform integer in `0..n`.
    pub fn next_below(&mut self, n: usize) -> usize {
        ((self.next_unit() * n as f64) as usize).min(n.saturating_sub(1))
    }

    /// Fisher-Yates shuffle driven by this generator.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.next_below(i + 1);
            items.swap(i, j);
        }
    }
}

/// Ordered collection of named tensors plus string metadata.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct WeightArchive {
    entries: Vec<(String, Tensor)>,
    metadata: BTreeMap<String, String>,
}

fn validate_name(name: &str) -> Result<()> {
    if name.is_empty() || !name.is_ascii() || name == META_ENTRY {
        return Err(Error::InvalidArgument(format!(
            "invalid parameter name {name:?}"
        )));
    }
    Ok(())
}

impl WeightArchive {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor) -> Result<()> {
        let name = name.into();
        validate_name(&name)?;
        if self.get(&name).is_some() {
            return Err(Error::InvalidArgument(format!(
                "duplicate parameter name `{name}`"
            )));
        }
        self.entries.push((name, tensor));
        Ok(())
    }

    /// Replaces the tensor stored under `name`, which must keep its shape.
    pub fn replace(&mut self, name: &str, tensor: Tensor) -> Result<()> {
        let slot = self
            .entries
            .iter_mut()
            .find(|(n, _)| n == name)
            .ok_or_else(|| Error::MissingParameter(name.to_string()))?;
        if slot.1.shape() != tensor.shape() {
            return Err(Error::ParameterShape {
                name: name.to_string(),
                expected: slot.1.shape().to_vec(),
                found: tensor.shape().to_vec(),
            });
        }
        slot.1 = tensor;
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.entries
            .iter_mut()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t)
    }

    /// Looks up `name` and checks it has exactly `shape`.
    pub fn require(&self, name: &str, shape: &[usize]) -> Result<&Tensor> {
        let t = self
            .get(name)
            .ok_or_else(|| Error::MissingParameter(name.to_string()))?;
        if t.shape() != shape {
            return Err(Error::ParameterShape {
                name: name.to_string(),
                expected: shape.to_vec(),
                found: t.shape().to_vec(),
            });
        }
        Ok(t)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.entries.iter().map(|(n, t)| (n.as_str(), t))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn metadata(&self) -> &BTreeMap<String, String> {
        &self.metadata
    }

    pub fn set_metadata(&mut self, key: &str, value: &str) -> Result<()> {
        if key.is_empty() || key.contains(['=', '\n']) || value.contains('\n') {
            return Err(Error::InvalidArgument(format!(
                "invalid metadata pair {key:?}={value:?}"
            )));
        }
        self.metadata.insert(key.to_string(), value.to_string());
        Ok(())
    }

    /// Moves every entry and metadata pair of `other` into `self`.
    pub fn merge(&mut self, other: WeightArchive) -> Result<()> {
        for (name, t) in other.entries {
            self.insert(name, t)?;
        }
        self.metadata.extend(other.metadata);
        Ok(())
    }

    /// Equal names, order, metadata, shapes and float bit patterns.
    pub fn bit_eq(&self, other: &WeightArchive) -> bool {
        self.metadata == other.metadata
            && self.entries.len() == other.entries.len()
            && self
                .entries
                .iter()
                .zip(&other.entries)
                .all(|((na, ta), (nb, tb))| na == nb && ta.bit_eq(tb))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        let meta = self.metadata_text();
        let count = self.entries.len() + usize::from(!meta.is_empty());
        out.extend_from_slice(&(count as u32).to_le_bytes());
        if !meta.is_empty() {
            write_header(&mut out, META_ENTRY, &[meta.len()]);
            out.extend_from_slice(meta.as_bytes());
        }
        for (name, t) in &self.entries {
            write_header(&mut out, name, t.shape());
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 16 {
            return Err(Error::Truncated("header"));
        }
        let (body, tail) = bytes.split_at(bytes.len() - 4);
        let stored = u32::from_le_bytes(tail.try_into().expect("4 bytes"));
        let computed = crc32fast::hash(body);
        if stored != computed {
            return Err(Error::ChecksumMismatch { stored, computed });
        }
        let magic: [u8; 4] = body[..4].try_into().expect("4 bytes");
        if magic != MAGIC {
            return Err(Error::BadMagic(magic));
        }
        let mut reader = Reader { buf: body, pos: 4 };
        let version = reader.u32("version")?;
        if version != VERSION {
            return Err(Error::UnsupportedVersion(version));
        }
        let count = reader.u32("entry count")? as usize;
        let mut archive = WeightArchive::new();
        for index in 0..count {
            let name_len = reader.u32("name length")? as usize;
            let name = std::str::from_utf8(reader.take(name_len, "name")?)
                .map_err(|_| Error::Format(format!("entry {index} name is not UTF-8")))?
                .to_string();
            let rank = reader.u32("rank")? as usize;
            if rank == 0 || rank > crate::tensor::MAX_RANK {
                return Err(Error::Format(format!("entry `{name}` has rank {rank}")));
            }
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(reader.u32("extent")? as usize);
            }
            if name == META_ENTRY {
                if index != 0 || rank != 1 {
                    return Err(Error::Format("misplaced metadata entry".into()));
                }
                let text = std::str::from_utf8(reader.take(shape[0], "metadata")?)
                    .map_err(|_| Error::Format("metadata is not UTF-8".into()))?;
                for line in text.lines() {
                    let (k, v) = line
                        .split_once('=')
                        .ok_or_else(|| Error::Format(format!("metadata line {line:?}")))?;
                    archive.set_metadata(k, v).map_err(|e| Error::Format(e.to_string()))?;
                }
                continue;
            }
            let len = shape
                .iter()
                .try_fold(1usize, |acc, &e| acc.checked_mul(e))
                .and_then(|n| n.checked_mul(4))
                .ok_or_else(|| Error::Format(format!("entry `{name}` is too large")))?;
            let raw = reader.take(len, "tensor data")?;
            let data = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                .collect();
            let tensor = Tensor::new(shape, data).map_err(|e| Error::Format(e.to_string()))?;
            archive
                .insert(name, tensor)
                .map_err(|e| Error::Format(e.to_string()))?;
        }
        if reader.pos != body.len() {
            return Err(Error::Format(format!(
                "{} trailing bytes before checksum",
                body.len() - reader.pos
            )));
        }
        Ok(archive)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    fn metadata_text(&self) -> String {
        self.metadata
            .iter()
            .map(|(k, v)| format!("{k}={v}\n"))
            .collect()
    }
}

fn write_header(out: &mut Vec<u8>, name: &str, shape: &[usize]) {
    out.extend_from_slice(&(name.len() as u32).to_le_bytes());
    out.extend_from_slice(name.as_bytes());
    out.extend_from_slice(&(shape.len() as u32).to_le_bytes());
    for &e in shape {
        out.extend_from_slice(&(e as u32).to_le_bytes());
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or(Error::Truncated(what))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, what: &'static str) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4, what)?.try_into().expect("4 bytes"),
        ))
    }
}

/// Deterministic archive with values uniform in `[-0.1, 0.1)` from [`Lcg`].
pub fn random_init(specs: &[(String, Vec<usize>)], seed: u64) -> Result<WeightArchive> {
    let mut rng = Lcg::new(seed);
    let mut archive = WeightArchive::new();
    for (name, shape) in specs {
        let len: usize = shape.iter().product();
        let data = (0..len)
            .map(|_| ((2.0 * rng.next_unit() - 1.0) * INIT_BOUND) as f32)
            .collect();
        archive.insert(name.clone(), Tensor::new(shape.clone(), data)?)?;
    }
    Ok(archive)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> WeightArchive {
        let mut a = random_init(
            &[
                ("conv.weight".into(), vec![2, 1, 3, 3]),
                ("conv.bias".into(), vec![2]),
            ],
            9,
        )
        .unwrap();
        a.set_metadata("normalization", "(v-127.5)/128").unwrap();
        a.set_metadata("class_order", "Mask,NoMask").unwrap();
        a
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let a = sample();
        let b = WeightArchive::from_bytes(&a.to_bytes()).unwrap();
        assert!(a.bit_eq(&b));
        assert_eq!(a.to_bytes(), b.to_bytes());
    }

    #[test]
    fn empty_archive_layout() {
        let bytes = WeightArchive::new().to_bytes();
        assert_eq!(bytes.len(), 16);
        assert_eq!(&bytes[..4], b"CWTS");
        assert_eq!(&bytes[4..12], &[1, 0, 0, 0, 0, 0, 0, 0]);
        assert!(WeightArchive::from_bytes(&bytes).unwrap().is_empty());
    }

    #[test]
    fn corrupted_final_byte_is_checksum_error() {
        let mut bytes = sample().to_bytes();
        *bytes.last_mut().unwrap() ^= 0xff;
        assert!(matches!(
            WeightArchive::from_bytes(&bytes),
            Err(Error::ChecksumMismatch { .. })
        ));
    }

    fn reseal(mut body: Vec<u8>) -> Vec<u8> {
        body.truncate(body.len() - 4);
        let crc = crc32fast::hash(&body);
        body.extend_from_slice(&crc.to_le_bytes());
        body
    }

    #[test]
    fn distinct_errors() {
        let mut bad_magic = sample().to_bytes();
        bad_magic[0] = b'X';
        assert!(matches!(
            WeightArchive::from_bytes(&reseal(bad_magic)),
            Err(Error::BadMagic(_))
        ));

        let mut bad_version = sample().to_bytes();
        bad_version[4] = 2;
        assert!(matches!(
            WeightArchive::from_bytes(&reseal(bad_version)),
            Err(Error::UnsupportedVersion(2))
        ));

        assert!(matches!(
            WeightArchive::from_bytes(b"CWTS\x01\0\0"),
            Err(Error::Truncated(_))
        ));

        // structurally short body with a valid checksum
        let mut short = sample().to_bytes();
        short.drain(short.len() - 12..short.len() - 4);
        assert!(matches!(
            WeightArchive::from_bytes(&reseal(short)),
            Err(Error::Truncated(_))
        ));
    }

    #[test]
    fn duplicate_and_reserved_names_rejected() {
        let mut a = sample();
        assert!(a.insert("conv.bias", Tensor::vector(vec![1.0])).is_err());
        assert!(a.insert(META_ENTRY, Tensor::vector(vec![1.0])).is_err());
        assert!(a.insert("", Tensor::vector(vec![1.0])).is_err());
        assert!(a.insert("caf\u{e9}", Tensor::vector(vec![1.0])).is_err());
    }

    #[test]
    fn require_checks_shape() {
        let a = sample();
        assert!(a.require("conv.bias", &[2]).is_ok());
        assert!(matches!(a.require("conv.bias", &[3]), Err(Error::ParameterShape { .. })));
        assert!(matches!(a.require("nope", &[3]), Err(Error::MissingParameter(_))));
    }

    #[test]
    fn random_init_is_seeded() {
        let spec = [("w".to_string(), vec![4, 4])];
        let a = random_init(&spec, 1).unwrap();
        assert!(a.bit_eq(&random_init(&spec, 1).unwrap()));
        assert!(!a.bit_eq(&random_init(&spec, 2).unwrap()));
        assert!(a.get("w").unwrap().data().iter().all(|v| v.abs() <= 0.1));
    }

    #[test]
    fn random_init_seed_zero_reference_draws() {
        // Values computed independently with arbitrary-precision integers:
        // s1 = 1442695040888963407, s2 = s1 * a + c mod 2^64.
        let a = random_init(&[("w".to_string(), vec![2])], 0).unwrap();
        let s1: u128 = 1442695040888963407;
        let s2: u128 = (s1 * 6364136223846793005 + 1442695040888963407) % (1u128 << 64);
        let draw = |s: u128| (2.0 * ((s >> 11) as f64 / 9007199254740992.0) - 1.0) * 0.1;
        assert_eq!(a.get("w").unwrap().data(), &[draw(s1) as f32, draw(s2) as f32]);
        assert_eq!(a.get("w").unwrap().data(), &[-0.08435827f32, -0.079660244f32]);
    }
}
