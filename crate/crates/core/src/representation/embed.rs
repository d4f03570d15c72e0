//! Dense semantic embedders.
//!
//! Real sentence-transformer vectors are produced offline and loaded through
//! [`PrecomputedEmbedder`]. [`HashEmbedder`] is a deterministic signed random
//! projection of unigram counts, used for tests and offline runs.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::tokenize::{term_counts, tokenize};
use super::vector::DenseVector;
use crate::error::{Error, Result};

/// Maps text (optionally keyed by a document id) to a dense vector.
pub trait SemanticEmbedder: Send + Sync {
    fn dimension(&self) -> usize;

    fn embed(&self, id: Option<&str>, text: &str) -> Result<DenseVector>;

    fn descriptor(&self) -> EmbedderDescriptor;
}

/// What a model file records about the embedder it was trained with.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EmbedderDescriptor {
    Hash { dimension: usize, seed: u64 },
    Precomputed { dimension: usize, digest: String },
}

impl EmbedderDescriptor {
    pub fn dimension(&self) -> usize {
        match self {
            EmbedderDescriptor::Hash { dimension, .. } | EmbedderDescriptor::Precomputed { dimension, .. } => {
                *dimension
            }
        }
    }
}

pub const DEFAULT_DIMENSION: usize = 512;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HashEmbedder {
    dimension: usize,
    seed: u64,
}

impl HashEmbedder {
    pub fn new(dimension: usize, seed: u64) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::Config("embedding dimension must be positive".into()));
        }
        Ok(Self { dimension, seed })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn project(&self, token: &str, count: f64, acc: &mut [f64]) {
        let base = fnv1a(token.as_bytes()) ^ self.seed.rotate_left(17);
        let mut j = 0;
        let mut block = 0u64;
        while j < self.dimension {
            let bits = splitmix64(base.wrapping_add(block));
            let take = (self.dimension - j).min(64);
            for b in 0..take {
                acc[j + b] += if (bits >> b) & 1 == 1 { count } else { -count };
            }
            j += take;
            block += 1;
        }
    }
}

impl SemanticEmbedder for HashEmbedder {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, _id: Option<&str>, text: &str) -> Result<DenseVector> {
        let mut acc = vec![0.0; self.dimension];
        let mut counts: Vec<(String, u32)> = term_counts(tokenize(text)).into_iter().collect();
        // accumulation order must not depend on hash-map iteration
        counts.sort();
        for (tok, c) in &counts {
            self.project(tok, f64::from(*c), &mut acc);
        }
        let n = super::vector::norm(&acc);
        if n > 0.0 {
            for v in &mut acc {
                *v /= n;
            }
        }
        DenseVector::new(acc)
    }

    fn descriptor(&self) -> EmbedderDescriptor {
        EmbedderDescriptor::Hash {
            dimension: self.dimension,
            seed: self.seed,
        }
    }
}

/// Vectors loaded from a sidecar file, keyed by document id or by raw text.
#[derive(Clone, Debug, PartialEq)]
pub struct PrecomputedEmbedder {
    dimension: usize,
    vectors: HashMap<String, DenseVector>,
    digest: String,
}

pub const SIDECAR_MAGIC: &[u8; 4] = b"HTEM";

impl PrecomputedEmbedder {
    pub fn from_records(records: Vec<(String, Vec<f64>)>) -> Result<Self> {
        let Some(dimension) = records.first().map(|(_, v)| v.len()) else {
            return Err(Error::Data("embedding sidecar holds no records".into()));
        };
        let mut hasher = Sha256::new();
        let mut vectors = HashMap::with_capacity(records.len());
        for (key, values) in records {
            if values.len() != dimension {
                return Err(Error::DimensionMismatch {
                    expected: dimension,
                    found: values.len(),
                });
            }
            hasher.update((key.len() as u64).to_le_bytes());
            hasher.update(key.as_bytes());
            for v in &values {
                hasher.update(v.to_le_bytes());
            }
            vectors.insert(key, DenseVector::new(values)?);
        }
        Ok(Self {
            dimension,
            vectors,
            digest: hex(&hasher.finalize()),
        })
    }

    /// Loads either layout; binary files are recognized by their magic bytes.
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        if bytes.starts_with(SIDECAR_MAGIC) {
            Self::from_records(read_sidecar_binary(&mut bytes.as_slice())?)
        } else {
            Self::from_records(read_sidecar_text(bytes.as_slice())?)
        }
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn digest(&self) -> &str {
        &self.digest
    }
}

impl SemanticEmbedder for PrecomputedEmbedder {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, id: Option<&str>, text: &str) -> Result<DenseVector> {
        if let Some(v) = id.and_then(|id| self.vectors.get(id)) {
            return Ok(v.clone());
        }
        self.vectors
            .get(text)
            .cloned()
            .ok_or_else(|| Error::EmbeddingNotFound {
                key: id.unwrap_or(text).to_string(),
            })
    }

    fn descriptor(&self) -> EmbedderDescriptor {
        EmbedderDescriptor::Precomputed {
            dimension: self.dimension,
            digest: self.digest.clone(),
        }
    }
}

/// Text sidecar: one record per line, `id<TAB>v1 v2 ... vD`.
pub fn read_sidecar_text<R: Read>(reader: R) -> Result<Vec<(String, Vec<f64>)>> {
    let mut out = Vec::new();
    for (lineno, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let (id, rest) = line.split_once('\t').ok_or_else(|| {
            Error::Data(format!("embedding sidecar line {}: missing TAB separator", lineno + 1))
        })?;
        let values = rest
            .split_ascii_whitespace()
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Data(format!("embedding sidecar line {}: {e}", lineno + 1)))?;
        out.push((id.to_string(), values));
    }
    Ok(out)
}

pub fn write_sidecar_text<W: Write>(mut w: W, records: &[(String, Vec<f64>)]) -> Result<()> {
    for (id, values) in records {
        if id.contains('\t') || id.contains('\n') {
            return Err(Error::Data(format!("embedding key {id:?} contains TAB or newline")));
        }
        let joined: Vec<String> = values.iter().map(|v| v.to_string()).collect();
        writeln!(w, "{id}\t{}", joined.join(" "))?;
    }
    Ok(())
}

/// Binary sidecar: `"HTEM", dim:u32, count:u32, then per record
/// id_len:u32, id bytes, dim x f32` (all little-endian).
pub fn read_sidecar_binary<R: Read>(r: &mut R) -> Result<Vec<(String, Vec<f64>)>> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != SIDECAR_MAGIC {
        return Err(Error::Data("embedding sidecar: bad magic".into()));
    }
    let dim = read_u32(r)? as usize;
    let count = read_u32(r)? as usize;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let len = read_u32(r)? as usize;
        let mut id = vec![0u8; len];
        r.read_exact(&mut id)?;
        let id = String::from_utf8(id).map_err(|_| Error::Data("embedding sidecar: id is not UTF-8".into()))?;
        let mut values = Vec::with_capacity(dim);
        for _ in 0..dim {
            let mut b = [0u8; 4];
            r.read_exact(&mut b)?;
            values.push(f64::from(f32::from_le_bytes(b)));
        }
        out.push((id, values));
    }
    Ok(out)
}

pub fn write_sidecar_binary<W: Write>(mut w: W, dim: usize, records: &[(String, Vec<f32>)]) -> Result<()> {
    w.write_all(SIDECAR_MAGIC)?;
    w.write_all(&(dim as u32).to_le_bytes())?;
    w.write_all(&(records.len() as u32).to_le_bytes())?;
    for (id, values) in records {
        if values.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: values.len(),
            });
        }
        w.write_all(&(id.len() as u32).to_le_bytes())?;
        w.write_all(id.as_bytes())?;
        for v in values {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

pub(crate) fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
