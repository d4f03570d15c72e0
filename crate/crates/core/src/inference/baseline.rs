//! Flat reference classifiers: nearest neighbours on the concatenated dual
//! vector, most frequent class, and uniform random.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{PredictionEntry, RankedPrediction};
use crate::model::EncodedSample;
use crate::representation::DualVector;
use crate::taxonomy::CategoryPath;

pub const DEFAULT_NEIGHBORS: usize = 3;

/// Brute-force cosine index over training samples. Each sample is treated
/// as the concatenation of its lexical and semantic vectors.
#[derive(Clone, Debug)]
pub struct KnnIndex {
    samples: Vec<EncodedSample>,
    sq_norms: Vec<f64>,
}

fn concat_dot(a: &DualVector, b: &DualVector) -> f64 {
    a.lexical.dot(&b.lexical) + crate::representation::vector::dot(a.semantic.values(), b.semantic.values())
}

fn concat_sq_norm(v: &DualVector) -> f64 {
    let l = v.lexical.norm();
    let s = v.semantic.norm();
    l * l + s * s
}

impl KnnIndex {
    pub fn new(samples: Vec<EncodedSample>) -> Self {
        let sq_norms = samples.iter().map(|s| concat_sq_norm(&s.vector)).collect();
        Self { samples, sq_norms }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Cosine between the concatenated query and sample `i`.
    pub fn similarity(&self, query: &DualVector, query_sq_norm: f64, i: usize) -> f64 {
        let denom = (query_sq_norm * self.sq_norms[i]).sqrt();
        if denom == 0.0 {
            0.0
        } else {
            (concat_dot(query, &self.samples[i].vector) / denom).clamp(-1.0, 1.0)
        }
    }

    /// The `k` most similar samples, ties toward the lower index.
    pub fn neighbors(&self, query: &DualVector, k: usize) -> Vec<(usize, f64)> {
        let qn = concat_sq_norm(query);
        let mut all: Vec<(usize, f64)> = (0..self.samples.len()).map(|i| (i, self.similarity(query, qn, i))).collect();
        let k = k.min(all.len());
        let cmp = |a: &(usize, f64), b: &(usize, f64)| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0));
        if k < all.len() && k > 0 {
            all.select_nth_unstable_by(k - 1, cmp);
            all.truncate(k);
        }
        all.sort_by(cmp);
        all.truncate(k);
        all
    }

    pub fn sample_path(&self, i: usize) -> &CategoryPath {
        &self.samples[i].path
    }

    /// Categories among the nearest neighbours, by vote count, then by the
    /// best neighbour similarity, then by path.
    pub fn predict(&self, query: &DualVector, k_neighbors: usize, k: usize) -> RankedPrediction {
        let mut votes: HashMap<&CategoryPath, (usize, f64)> = HashMap::new();
        for (i, sim) in self.neighbors(query, k_neighbors) {
            let e = votes.entry(&self.samples[i].path).or_insert((0, f64::NEG_INFINITY));
            e.0 += 1;
            e.1 = e.1.max(sim);
        }
        let mut ranked: Vec<(&CategoryPath, (usize, f64))> = votes.into_iter().collect();
        ranked.sort_by(|a, b| {
            b.1 .0
                .cmp(&a.1 .0)
                .then(b.1 .1.total_cmp(&a.1 .1))
                .then_with(|| a.0.cmp(b.0))
        });
        RankedPrediction {
            k,
            entries: ranked
                .into_iter()
                .take(k)
                .map(|(p, (v, _))| PredictionEntry::plain(p.clone(), v as f64))
                .collect(),
        }
    }
}

/// Training label frequencies.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LabelCounts {
    counts: BTreeMap<CategoryPath, u64>,
}

impl LabelCounts {
    pub fn from_paths<'a>(paths: impl IntoIterator<Item = &'a CategoryPath>) -> Self {
        let mut counts = BTreeMap::new();
        for p in paths {
            *counts.entry(p.clone()).or_insert(0) += 1;
        }
        Self { counts }
    }

    pub fn get(&self, path: &CategoryPath) -> u64 {
        self.counts.get(path).copied().unwrap_or(0)
    }

    pub fn labels(&self) -> Vec<CategoryPath> {
        self.counts.keys().cloned().collect()
    }
}

/// Most frequent labels first, ties lexicographic.
pub fn majority_predict(counts: &LabelCounts, k: usize) -> RankedPrediction {
    let mut ranked: Vec<(&CategoryPath, u64)> = counts.counts.iter().map(|(p, c)| (p, *c)).collect();
    ranked.sort_by(|a, b| match b.1.cmp(&a.1) {
        Ordering::Equal => a.0.cmp(b.0),
        o => o,
    });
    RankedPrediction {
        k,
        entries: ranked
            .into_iter()
            .take(k)
            .map(|(p, c)| PredictionEntry::plain(p.clone(), c as f64))
            .collect(),
    }
}

/// A seeded stream of uniformly random rankings over a label set.
#[derive(Clone, Debug)]
pub struct RandomBaseline {
    labels: Vec<CategoryPath>,
    rng: ChaCha8Rng,
}

impl RandomBaseline {
    pub fn new(mut labels: Vec<CategoryPath>, seed: u64) -> Self {
        labels.sort();
        labels.dedup();
        Self {
            labels,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn next_prediction(&mut self, k: usize) -> RankedPrediction {
        let mut pool = self.labels.clone();
        let n = k.min(pool.len());
        let (picked, _) = pool.partial_shuffle(&mut self.rng, n);
        let picks = picked.to_vec();
        RankedPrediction {
            k,
            entries: picks.into_iter().map(|p| PredictionEntry::plain(p, 0.0)).collect(),
        }
    }
}

pub fn random_predict(labels: &[CategoryPath], seed: u64, k: usize) -> RankedPrediction {
    RandomBaseline::new(labels.to_vec(), seed).next_prediction(k)
}
