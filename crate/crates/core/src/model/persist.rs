//! Binary model container. The byte layout is documented in `FORMAT.md` at
//! the repository root; all integers and floats are little-endian.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::centroid::{Centroid, CentroidSet, NodeCentroids};
use super::{EncodedSample, ModelConfig, SampleStore, TrainedModel};
use crate::error::{Error, FormatError, Result};
use crate::representation::{DenseVector, DualVector, EmbedderDescriptor, SparseVector, TfidfConfig, TfidfModel};
use crate::taxonomy::{CategoryPath, TaxonomyTree};

pub const MAGIC: &[u8; 4] = b"HTAX";
pub const FORMAT_VERSION: u16 = 1;
pub const HEADER_LEN: usize = 48;
pub const CHECKSUM_LEN: usize = 32;

const SECTION_CONFIG: u8 = 1;
const SECTION_TFIDF: u8 = 2;
const SECTION_EMBEDDER: u8 = 3;
const SECTION_NODES: u8 = 4;
const SECTION_SAMPLES: u8 = 5;

impl TrainedModel {
    pub fn to_bytes(&self) -> Vec<u8> {
        let config_json = serde_json::to_vec(&self.config).expect("config serializes");
        let mut payload = Vec::new();
        write_section(&mut payload, SECTION_CONFIG, &config_json);
        write_section(&mut payload, SECTION_TFIDF, &encode_tfidf(&self.tfidf));
        let embedder_json = serde_json::to_vec(&self.embedder).expect("descriptor serializes");
        write_section(&mut payload, SECTION_EMBEDDER, &embedder_json);
        write_section(&mut payload, SECTION_NODES, &self.encode_nodes());
        if let Some(store) = &self.store {
            write_section(&mut payload, SECTION_SAMPLES, &encode_store(store, self.semantic_dimension()));
        }

        let mut out = Vec::with_capacity(HEADER_LEN + payload.len() + CHECKSUM_LEN);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&0u16.to_le_bytes());
        out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
        out.extend_from_slice(&Sha256::digest(&config_json));
        out.extend_from_slice(&payload);
        let checksum = Sha256::digest(&out);
        out.extend_from_slice(&checksum);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let truncated = |expected: usize| FormatError::Truncated {
            expected: expected as u64,
            actual: bytes.len() as u64,
        };
        if bytes.len() < 6 {
            return Err(truncated(HEADER_LEN + CHECKSUM_LEN).into());
        }
        if &bytes[..4] != MAGIC {
            return Err(FormatError::BadMagic.into());
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != FORMAT_VERSION {
            return Err(FormatError::UnsupportedVersion {
                found: version,
                supported: FORMAT_VERSION,
            }
            .into());
        }
        if bytes.len() < HEADER_LEN + CHECKSUM_LEN {
            return Err(truncated(HEADER_LEN + CHECKSUM_LEN).into());
        }
        let payload_len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes"));
        let declared = (HEADER_LEN as u64)
            .checked_add(payload_len)
            .and_then(|v| v.checked_add(CHECKSUM_LEN as u64))
            .ok_or_else(|| FormatError::Malformed("payload length overflows".into()))?;
        if (bytes.len() as u64) < declared {
            return Err(FormatError::Truncated {
                expected: declared,
                actual: bytes.len() as u64,
            }
            .into());
        }
        if (bytes.len() as u64) > declared {
            return Err(FormatError::Malformed("trailing bytes after checksum".into()).into());
        }
        let body_end = bytes.len() - CHECKSUM_LEN;
        if Sha256::digest(&bytes[..body_end]).as_slice() != &bytes[body_end..] {
            return Err(FormatError::ChecksumMismatch.into());
        }
        let digest = &bytes[16..48];

        let mut sections: BTreeMap<u8, &[u8]> = BTreeMap::new();
        let mut r = Reader::new(&bytes[HEADER_LEN..body_end]);
        while !r.is_empty() {
            let tag = r.u8()?;
            let len = r.u64()? as usize;
            sections.insert(tag, r.take(len)?);
        }
        let section = |tag: u8| {
            sections
                .get(&tag)
                .copied()
                .ok_or_else(|| FormatError::Malformed(format!("missing section {tag}")))
        };
        let config_json = section(SECTION_CONFIG)?;
        if Sha256::digest(config_json).as_slice() != digest {
            return Err(FormatError::Malformed("config digest does not match header".into()).into());
        }
        let config: ModelConfig = serde_json::from_slice(config_json)
            .map_err(|e| FormatError::Malformed(format!("config: {e}")))?;
        let tfidf = decode_tfidf(section(SECTION_TFIDF)?)?;
        let embedder: EmbedderDescriptor = serde_json::from_slice(section(SECTION_EMBEDDER)?)
            .map_err(|e| FormatError::Malformed(format!("embedder: {e}")))?;
        let (tree, nodes, next_ordinal) =
            decode_nodes(section(SECTION_NODES)?, tfidf.dimension(), embedder.dimension())?;
        let store = match sections.get(&SECTION_SAMPLES) {
            Some(b) => Some(decode_store(b, tfidf.dimension(), embedder.dimension())?),
            None => None,
        };
        if config.child_sampling.enabled && store.is_none() {
            return Err(FormatError::Malformed("child-sampling model without sample store".into()).into());
        }
        let targets = tree.enumerate_paths();
        Ok(Self {
            config,
            tfidf,
            embedder,
            tree,
            nodes,
            store,
            next_ordinal,
            targets,
        })
    }

    /// Writes atomically: a temporary sibling file is renamed over `path`.
    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("tmp-write");
        {
            let mut f = std::fs::File::create(&tmp)?;
            f.write_all(&self.to_bytes())?;
            f.sync_all()?;
        }
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    fn encode_nodes(&self) -> Vec<u8> {
        let mut w = Vec::new();
        put_u32(&mut w, self.lexical_dimension() as u32);
        put_u32(&mut w, self.semantic_dimension() as u32);
        put_u64(&mut w, self.next_ordinal);
        put_u32(&mut w, self.tree.len() as u32);
        for node in self.tree.nodes() {
            let key = node.path().render();
            put_str(&mut w, &key);
            put_u64(&mut w, node.direct_sample_count());
            let nc = self.nodes.get(&key).expect("every node has centroids");
            for set in [&nc.lexical, &nc.semantic] {
                put_u64(&mut w, set.pool_count());
                put_f64s(&mut w, set.pool_sum());
                put_u32(&mut w, set.centroids().len() as u32);
                for c in set.centroids() {
                    put_u64(&mut w, c.members());
                    put_f64s(&mut w, c.mean());
                    put_f64s(&mut w, c.unit());
                }
            }
        }
        w
    }
}

fn write_section(out: &mut Vec<u8>, tag: u8, body: &[u8]) {
    out.push(tag);
    put_u64(out, body.len() as u64);
    out.extend_from_slice(body);
}

fn encode_tfidf(m: &TfidfModel) -> Vec<u8> {
    let mut w = Vec::new();
    let cfg = serde_json::to_vec(m.config()).expect("tfidf config serializes");
    put_u32(&mut w, cfg.len() as u32);
    w.extend_from_slice(&cfg);
    put_u64(&mut w, m.n_docs() as u64);
    put_u32(&mut w, m.dimension() as u32);
    for ((t, df), idf) in m.terms().iter().zip(m.doc_freq()).zip(m.idf()) {
        put_str(&mut w, t);
        put_u64(&mut w, *df);
        put_f64(&mut w, *idf);
    }
    w
}

fn decode_tfidf(b: &[u8]) -> Result<TfidfModel> {
    let mut r = Reader::new(b);
    let cfg_len = r.u32()? as usize;
    let config: TfidfConfig = serde_json::from_slice(r.take(cfg_len)?)
        .map_err(|e| FormatError::Malformed(format!("tfidf config: {e}")))?;
    let n_docs = r.u64()? as usize;
    let n = r.u32()? as usize;
    let (mut terms, mut dfs, mut idfs) = (Vec::new(), Vec::new(), Vec::new());
    for _ in 0..n {
        terms.push(r.string()?);
        dfs.push(r.u64()?);
        idfs.push(r.f64()?);
    }
    r.finish("tfidf")?;
    Ok(TfidfModel::from_parts(config, n_docs, terms, idfs, dfs))
}

type DecodedNodes = (TaxonomyTree, BTreeMap<String, NodeCentroids>, u64);

fn decode_nodes(b: &[u8], lex_dim: usize, sem_dim: usize) -> Result<DecodedNodes> {
    let mut r = Reader::new(b);
    let (l, s) = (r.u32()? as usize, r.u32()? as usize);
    if l != lex_dim || s != sem_dim {
        return Err(FormatError::Malformed("centroid dimensions disagree with representations".into()).into());
    }
    let next_ordinal = r.u64()?;
    let count = r.u32()? as usize;
    let mut tree = TaxonomyTree::new();
    let mut nodes = BTreeMap::new();
    for _ in 0..count {
        let key = r.string()?;
        let path = CategoryPath::parse(&key).map_err(|_| FormatError::Malformed(format!("bad path {key:?}")))?;
        let direct = r.u64()?;
        tree.ensure_node(&path);
        if direct > 0 {
            tree.insert_samples(&path, direct);
        }
        let mut sets = Vec::with_capacity(2);
        for dim in [lex_dim, sem_dim] {
            let pool_count = r.u64()?;
            let pool_sum = r.f64s(dim)?;
            let n = r.u32()? as usize;
            let mut centroids = Vec::with_capacity(n);
            for _ in 0..n {
                let members = r.u64()?;
                let mean = r.f64s(dim)?;
                let unit = r.f64s(dim)?;
                centroids.push(Centroid::from_parts(mean, unit, members));
            }
            sets.push(CentroidSet::from_parts(pool_sum, pool_count, centroids));
        }
        let semantic = sets.pop().expect("two sets");
        let lexical = sets.pop().expect("two sets");
        nodes.insert(key, NodeCentroids { lexical, semantic });
    }
    r.finish("nodes")?;
    if tree.len() != nodes.len() {
        return Err(FormatError::Malformed("node list is not closed under ancestors".into()).into());
    }
    Ok((tree, nodes, next_ordinal))
}

fn encode_store(store: &SampleStore, sem_dim: usize) -> Vec<u8> {
    let mut w = Vec::new();
    put_u64(&mut w, store.entries.len() as u64);
    for (ordinal, s) in &store.entries {
        put_u64(&mut w, *ordinal);
        put_str(&mut w, &s.path.render());
        put_u32(&mut w, s.vector.lexical.nnz() as u32);
        for &(i, v) in s.vector.lexical.entries() {
            put_u32(&mut w, i);
            put_f64(&mut w, v);
        }
        debug_assert_eq!(s.vector.semantic.dimension(), sem_dim);
        put_f64s(&mut w, s.vector.semantic.values());
    }
    w
}

fn decode_store(b: &[u8], lex_dim: usize, sem_dim: usize) -> Result<SampleStore> {
    let mut r = Reader::new(b);
    let n = r.u64()? as usize;
    let mut entries = Vec::with_capacity(n.min(1 << 20));
    for _ in 0..n {
        let ordinal = r.u64()?;
        let raw = r.string()?;
        let path = CategoryPath::parse(&raw).map_err(|_| FormatError::Malformed(format!("bad path {raw:?}")))?;
        let nnz = r.u32()? as usize;
        let mut pairs = Vec::with_capacity(nnz);
        for _ in 0..nnz {
            pairs.push((r.u32()?, r.f64()?));
        }
        let lexical = SparseVector::from_pairs(lex_dim, pairs)
            .map_err(|e| FormatError::Malformed(format!("sample vector: {e}")))?;
        let semantic =
            DenseVector::new(r.f64s(sem_dim)?).map_err(|e| FormatError::Malformed(format!("sample vector: {e}")))?;
        entries.push((
            ordinal,
            EncodedSample {
                vector: DualVector { lexical, semantic },
                path,
            },
        ));
    }
    r.finish("samples")?;
    Ok(SampleStore { entries })
}

fn put_u32(w: &mut Vec<u8>, v: u32) {
    w.extend_from_slice(&v.to_le_bytes());
}

fn put_u64(w: &mut Vec<u8>, v: u64) {
    w.extend_from_slice(&v.to_le_bytes());
}

fn put_f64(w: &mut Vec<u8>, v: f64) {
    w.extend_from_slice(&v.to_le_bytes());
}

fn put_f64s(w: &mut Vec<u8>, vs: &[f64]) {
    for v in vs {
        put_f64(w, *v);
    }
}

fn put_str(w: &mut Vec<u8>, s: &str) {
    put_u32(w, s.len() as u32);
    w.extend_from_slice(s.as_bytes());
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    fn is_empty(&self) -> bool {
        self.pos >= self.buf.len()
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::from(FormatError::Malformed("section overruns its bounds".into())))?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(n.checked_mul(8).ok_or_else(|| FormatError::Malformed("length overflow".into()))?)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| FormatError::Malformed("string is not UTF-8".into()).into())
    }

    fn finish(&self, what: &str) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(FormatError::Malformed(format!("{what} section has trailing bytes")).into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ChildSamplingConfig, TrainingSample};

    fn small_model(config: &ModelConfig) -> TrainedModel {
        let texts = [
            ("vpn tunnel drops", "Net/Vpn"),
            ("vpn client fails", "Net/Vpn"),
            ("mail quota full", "Net/Mail"),
            ("mail client sync fails", "Net/Mail"),
            ("printer jam tray", "Hw/Printer/Jam"),
            ("printer jam again tray", "Hw/Printer/Jam"),
            ("printer offline", "Hw/Printer"),
        ];
        let samples: Vec<TrainingSample> = texts
            .iter()
            .map(|(t, c)| TrainingSample::new(*t, CategoryPath::parse(c).unwrap()))
            .collect();
        TrainedModel::train(&samples, config).unwrap().0
    }

    fn cfg() -> ModelConfig {
        ModelConfig {
            embedder: crate::model::EmbedderConfig::Hash { dimension: 16, seed: 1 },
            tfidf: TfidfConfig {
                min_df: 1,
                ..TfidfConfig::default()
            },
            ..ModelConfig::default()
        }
    }

    #[test]
    fn round_trip_preserves_model() {
        let m = small_model(&cfg());
        let bytes = m.to_bytes();
        assert_eq!(&bytes[..4], b"HTAX");
        assert_eq!(TrainedModel::from_bytes(&bytes).unwrap(), m);
        assert_eq!(TrainedModel::from_bytes(&bytes).unwrap().to_bytes(), bytes);
    }

    #[test]
    fn round_trip_with_sample_store() {
        let mut c = cfg();
        c.child_sampling = ChildSamplingConfig {
            enabled: true,
            proportion: 0.5,
        };
        let m = small_model(&c);
        assert!(m.sample_store().is_some());
        assert_eq!(TrainedModel::from_bytes(&m.to_bytes()).unwrap(), m);
    }

    #[test]
    fn corrupt_byte_fails_checksum() {
        let bytes = small_model(&cfg()).to_bytes();
        let mut bad = bytes.clone();
        let mid = HEADER_LEN + (bytes.len() - HEADER_LEN) / 2;
        bad[mid] ^= 0x01;
        assert!(matches!(
            TrainedModel::from_bytes(&bad),
            Err(Error::Format(FormatError::ChecksumMismatch))
        ));
    }

    #[test]
    fn future_version_rejected() {
        let mut bytes = small_model(&cfg()).to_bytes();
        bytes[4..6].copy_from_slice(&2u16.to_le_bytes());
        let end = bytes.len() - CHECKSUM_LEN;
        let sum = Sha256::digest(&bytes[..end]);
        bytes[end..].copy_from_slice(&sum);
        assert!(matches!(
            TrainedModel::from_bytes(&bytes),
            Err(Error::Format(FormatError::UnsupportedVersion { found: 2, supported: 1 }))
        ));
    }

    #[test]
    fn truncation_and_magic() {
        let bytes = small_model(&cfg()).to_bytes();
        for cut in [3, 40, bytes.len() / 2, bytes.len() - 1] {
            assert!(
                matches!(TrainedModel::from_bytes(&bytes[..cut]), Err(Error::Format(FormatError::Truncated { .. }))),
                "cut at {cut}"
            );
        }
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(TrainedModel::from_bytes(&bad), Err(Error::Format(FormatError::BadMagic))));
    }

    #[test]
    fn save_and_load_file() {
        let dir = std::env::temp_dir().join(format!("htc-persist-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("m.htax");
        let m = small_model(&cfg());
        m.save(&path).unwrap();
        assert_eq!(TrainedModel::load(&path).unwrap(), m);
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
