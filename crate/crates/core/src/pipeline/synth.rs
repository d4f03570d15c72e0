//! Seeded synthetic ticket corpora with a known taxonomy.
//!
//! Each node owns a private vocabulary of pseudo-words. A document draws its
//! tokens from its category's vocabulary, from its ancestors' vocabularies,
//! and from a shared noise pool.

use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::clean::CleanSample;
use crate::error::{Error, Result};
use crate::taxonomy::{CategoryPath, NodeKind, TaxonomyTree};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    /// Labeled categories, i.e. nodes that receive samples.
    pub categories: usize,
    pub samples: usize,
    /// Relative share of categories at each depth (depth ≥ 2).
    pub depth_weights: BTreeMap<usize, f64>,
    /// Zipf exponent of category sizes; 0 gives equal sizes.
    pub imbalance: f64,
    pub vocab_per_category: usize,
    /// Fraction of each category's vocabulary borrowed from other categories.
    pub overlap: f64,
    pub noise_vocab: usize,
    /// Probability that a token comes from the shared noise pool.
    pub noise_rate: f64,
    /// Probability that a token comes from an ancestor's vocabulary.
    pub ancestor_rate: f64,
    /// Sample-free internal nodes per labeled category.
    pub stale_ratio: f64,
    pub min_tokens: usize,
    pub max_tokens: usize,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            categories: 123,
            samples: 8968,
            depth_weights: BTreeMap::from([(2, 479.0), (3, 8145.0), (4, 332.0), (5, 12.0)]),
            imbalance: 0.7,
            vocab_per_category: 20,
            overlap: 0.1,
            noise_vocab: 200,
            noise_rate: 0.25,
            ancestor_rate: 0.25,
            stale_ratio: 15.0 / 123.0,
            min_tokens: 10,
            max_tokens: 30,
            seed: 42,
        }
    }
}

impl SynthSpec {
    /// Paper-scale volume: 123 categories over 8,968 tickets, 138 nodes in total.
    pub fn full_scale() -> Self {
        Self::default()
    }

    pub fn stale_count(&self) -> usize {
        (self.stale_ratio * self.categories as f64).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidSynthSpec(m.into()));
        if self.categories == 0 || self.samples == 0 || self.vocab_per_category == 0 {
            return bad("categories, samples and vocab_per_category must be positive");
        }
        if self.samples < self.categories {
            return bad("need at least one sample per category");
        }
        for (name, v) in [("overlap", self.overlap), ("noise_rate", self.noise_rate), ("ancestor_rate", self.ancestor_rate)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidSynthSpec(format!("{name} must be in [0, 1]")));
            }
        }
        if self.noise_rate + self.ancestor_rate > 1.0 {
            return bad("noise_rate + ancestor_rate must not exceed 1");
        }
        if self.noise_rate > 0.0 && self.noise_vocab == 0 {
            return bad("noise_rate > 0 needs a noise vocabulary");
        }
        if !(self.imbalance >= 0.0 && self.imbalance.is_finite()) || !(self.stale_ratio >= 0.0 && self.stale_ratio.is_finite()) {
            return bad("imbalance and stale_ratio must be non-negative");
        }
        if self.min_tokens == 0 || self.min_tokens > self.max_tokens {
            return bad("token range must satisfy 1 <= min_tokens <= max_tokens");
        }
        if self.depth_weights.is_empty()
            || self.depth_weights.iter().any(|(d, w)| *d < 2 || !(*w >= 0.0 && w.is_finite()))
            || self.depth_weights.values().sum::<f64>() <= 0.0
        {
            return bad("depth_weights need depths >= 2 with non-negative weights and a positive total");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestNode {
    pub path: CategoryPath,
    pub kind: NodeKind,
    pub samples: usize,
    pub vocabulary: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthManifest {
    pub spec: SynthSpec,
    pub nodes: Vec<ManifestNode>,
    /// Samples per category depth.
    pub depth_histogram: BTreeMap<usize, usize>,
    pub node_count: usize,
    pub stale_count: usize,
    pub category_count: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticCorpus {
    pub samples: Vec<CleanSample>,
    pub manifest: SynthManifest,
}

const ONSETS: [&str; 16] = ["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "sh", "tr"];
const VOWELS: [&str; 6] = ["a", "e", "i", "o", "u", "ai"];

fn pseudo_word(rng: &mut ChaCha8Rng, syllables: usize) -> String {
    (0..syllables)
        .map(|_| format!("{}{}", ONSETS[rng.random_range(0..ONSETS.len())], VOWELS[rng.random_range(0..VOWELS.len())]))
        .collect()
}

struct WordSource {
    used: HashSet<String>,
}

impl WordSource {
    fn fresh(&mut self, rng: &mut ChaCha8Rng, syllables: usize) -> String {
        for attempt in 0.. {
            let w = pseudo_word(rng, syllables + attempt / 20);
            if self.used.insert(w.clone()) {
                return w;
            }
        }
        unreachable!()
    }
}

fn capitalize(w: &str) -> String {
    let mut c = w.chars();
    c.next().map_or(String::new(), |f| f.to_uppercase().collect::<String>() + c.as_str())
}

/// Builds the node set: `per_depth[d]` labeled categories at depth `d` and
/// `stale` sample-free nodes, about half of them roots.
fn build_taxonomy(
    per_depth: &BTreeMap<usize, usize>,
    stale: usize,
    words: &mut WordSource,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<CategoryPath>, Vec<CategoryPath>)> {
    let max_depth = *per_depth.keys().max().expect("non-empty");
    let roots = stale.div_ceil(2).max(1);
    let interior = stale.saturating_sub(roots);
    // interior stale nodes go where the next level has children to host
    let hosts: Vec<usize> = (2..max_depth).collect();
    let host_weights: Vec<f64> = hosts
        .iter()
        .map(|d| per_depth.get(&(d + 1)).copied().unwrap_or(0) as f64)
        .collect();
    let mut stale_at: BTreeMap<usize, usize> = BTreeMap::new();
    let total_w: f64 = host_weights.iter().sum();
    if interior > 0 {
        if total_w == 0.0 {
            return Err(Error::InvalidSynthSpec("more stale nodes than interior positions".into()));
        }
        let fr: Vec<f64> = host_weights.iter().map(|w| w / total_w).collect();
        for (d, n) in hosts.iter().zip(allocate_loose(interior, &fr)) {
            stale_at.insert(*d, n);
        }
    }
    stale_at.insert(1, roots);

    let mut labeled = Vec::new();
    let mut stale_nodes = Vec::new();
    let mut level: Vec<(CategoryPath, bool)> = (0..roots)
        .map(|_| (CategoryPath::from_segments([capitalize(&words.fresh(rng, 2))]).unwrap(), true))
        .collect();
    stale_nodes.extend(level.iter().map(|(p, _)| p.clone()));
    for depth in 2..=max_depth {
        let n_labeled = per_depth.get(&depth).copied().unwrap_or(0);
        let n_stale = stale_at.get(&depth).copied().unwrap_or(0);
        let total = n_labeled + n_stale;
        let must_host: Vec<usize> = (0..level.len()).filter(|&i| level[i].1).collect();
        if total < must_host.len() {
            return Err(Error::InvalidSynthSpec(format!(
                "depth {} has {} stale nodes but only {} children at depth {depth}",
                depth - 1,
                must_host.len(),
                total
            )));
        }
        if total > 0 && level.is_empty() {
            return Err(Error::InvalidSynthSpec(format!("no parents available for depth {depth}")));
        }
        let mut kinds: Vec<bool> = std::iter::repeat_n(false, n_labeled).chain(std::iter::repeat_n(true, n_stale)).collect();
        kinds.shuffle(rng);
        let mut next = Vec::with_capacity(total);
        for (j, is_stale) in kinds.into_iter().enumerate() {
            let parent = if j < must_host.len() {
                must_host[j]
            } else {
                rng.random_range(0..level.len())
            };
            let name = capitalize(&words.fresh(rng, 2));
            let path = level[parent].0.child(&name)?;
            if is_stale {
                stale_nodes.push(path.clone());
            } else {
                labeled.push(path.clone());
            }
            next.push((path, is_stale));
        }
        // a stale node with no children cannot exist, so hosts carry over only if unhosted
        level = next;
    }
    if level.iter().any(|(_, s)| *s) {
        return Err(Error::InvalidSynthSpec("stale nodes at the deepest level cannot have children".into()));
    }
    Ok((labeled, stale_nodes))
}

/// Like `allocate` but without forcing the first part to be non-empty.
fn allocate_loose(n: usize, fractions: &[f64]) -> Vec<usize> {
    let quotas: Vec<f64> = fractions.iter().map(|f| f * n as f64).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let mut order: Vec<usize> = (0..fractions.len()).collect();
    order.sort_by(|&a, &b| (quotas[b] - quotas[b].floor()).total_cmp(&(quotas[a] - quotas[a].floor())).then(a.cmp(&b)));
    let short = n - counts.iter().sum::<usize>();
    for &i in order.iter().take(short) {
        counts[i] += 1;
    }
    counts
}

/// Categories per depth: proportional, and at least one for every depth
/// with positive weight.
fn categories_per_depth(spec: &SynthSpec) -> Result<BTreeMap<usize, usize>> {
    let depths: Vec<usize> = spec.depth_weights.iter().filter(|(_, w)| **w > 0.0).map(|(d, _)| *d).collect();
    if depths.len() > spec.categories {
        return Err(Error::InvalidSynthSpec("fewer categories than depths with positive weight".into()));
    }
    let total: f64 = depths.iter().map(|d| spec.depth_weights[d]).sum();
    let fr: Vec<f64> = depths.iter().map(|d| spec.depth_weights[d] / total).collect();
    let mut counts = allocate_loose(spec.categories, &fr);
    while let Some(z) = counts.iter().position(|&c| c == 0) {
        let donor = (0..counts.len()).max_by_key(|&i| (counts[i], std::cmp::Reverse(i))).expect("non-empty");
        counts[donor] -= 1;
        counts[z] += 1;
    }
    Ok(depths.into_iter().zip(counts).collect())
}

pub fn generate_synthetic(spec: &SynthSpec) -> Result<SyntheticCorpus> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut words = WordSource { used: HashSet::new() };
    let per_depth = categories_per_depth(spec)?;
    let (labeled, stale) = build_taxonomy(&per_depth, spec.stale_count(), &mut words, &mut rng)?;

    let mut vocab: BTreeMap<CategoryPath, Vec<String>> = BTreeMap::new();
    for path in labeled.iter().chain(&stale) {
        let own: Vec<String> = (0..spec.vocab_per_category).map(|_| words.fresh(&mut rng, 3)).collect();
        vocab.insert(path.clone(), own);
    }
    let noise: Vec<String> = (0..spec.noise_vocab).map(|_| words.fresh(&mut rng, 2)).collect();
    if spec.overlap > 0.0 && labeled.len() > 1 {
        let originals = vocab.clone();
        for (i, path) in labeled.iter().enumerate() {
            let borrowed = (spec.overlap * spec.vocab_per_category as f64).round() as usize;
            for slot in 0..borrowed.min(spec.vocab_per_category) {
                let mut other = rng.random_range(0..labeled.len() - 1);
                if other >= i {
                    other += 1;
                }
                let donor = &originals[&labeled[other]];
                let word = donor[rng.random_range(0..donor.len())].clone();
                vocab.get_mut(path).expect("present")[slot] = word;
            }
        }
    }

    // Category sizes: Zipf weights over a random rank order.
    let mut ranks: Vec<usize> = (1..=labeled.len()).collect();
    ranks.shuffle(&mut rng);
    let weights: Vec<f64> = ranks.iter().map(|&r| 1.0 / (r as f64).powf(spec.imbalance)).collect();
    let total_w: f64 = weights.iter().sum();
    let extra = spec.samples - labeled.len();
    let extra_alloc = allocate_loose(extra, &weights.iter().map(|w| w / total_w).collect::<Vec<_>>());
    let sizes: Vec<usize> = extra_alloc.iter().map(|e| e + 1).collect();

    let mut order: Vec<usize> = sizes.iter().enumerate().flat_map(|(c, &n)| std::iter::repeat_n(c, n)).collect();
    order.shuffle(&mut rng);
    let mut samples = Vec::with_capacity(spec.samples);
    for (n, &c) in order.iter().enumerate() {
        let path = &labeled[c];
        let ancestors: Vec<CategoryPath> = path.ancestors().filter(|a| a != path).collect();
        let own = &vocab[path];
        let len = rng.random_range(spec.min_tokens..=spec.max_tokens);
        let tokens: Vec<&str> = (0..len)
            .map(|_| {
                let u: f64 = rng.random();
                if u < spec.noise_rate {
                    noise[rng.random_range(0..noise.len())].as_str()
                } else if u < spec.noise_rate + spec.ancestor_rate && !ancestors.is_empty() {
                    let a = &vocab[&ancestors[rng.random_range(0..ancestors.len())]];
                    a[rng.random_range(0..a.len())].as_str()
                } else {
                    own[rng.random_range(0..own.len())].as_str()
                }
            })
            .collect();
        let split = (len / 4).clamp(1, len.saturating_sub(1).max(1));
        let (title, desc) = tokens.split_at(split.min(tokens.len()));
        let desc = if desc.is_empty() { title } else { desc };
        samples.push(CleanSample::new(format!("T{:06}", n + 1), title.join(" "), desc.join(" "), path.clone()));
    }

    let tree = TaxonomyTree::from_paths(samples.iter().map(|s| &s.path));
    let mut depth_histogram = BTreeMap::new();
    for s in &samples {
        *depth_histogram.entry(s.path.depth()).or_insert(0) += 1;
    }
    let nodes: Vec<ManifestNode> = tree
        .nodes()
        .map(|n| ManifestNode {
            path: n.path().clone(),
            kind: n.kind(),
            samples: n.direct_sample_count() as usize,
            vocabulary: vocab.get(n.path()).cloned().unwrap_or_default(),
        })
        .collect();
    let counts = tree.counts();
    let manifest = SynthManifest {
        spec: spec.clone(),
        node_count: counts.nodes,
        stale_count: counts.stale,
        category_count: counts.predictable,
        nodes,
        depth_histogram,
    };
    Ok(SyntheticCorpus { samples, manifest })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SynthSpec {
        SynthSpec {
            categories: 30,
            samples: 1000,
            seed: 7,
            ..SynthSpec::default()
        }
    }

    #[test]
    fn deterministic_under_seed() {
        let a = generate_synthetic(&small()).unwrap();
        let b = generate_synthetic(&small()).unwrap();
        assert_eq!(a, b);
        let c = generate_synthetic(&SynthSpec { seed: 8, ..small() }).unwrap();
        assert_ne!(a.samples, c.samples);
    }

    #[test]
    fn counts_match_spec() {
        let c = generate_synthetic(&small()).unwrap();
        assert_eq!(c.samples.len(), 1000);
        assert_eq!(c.manifest.category_count, 30);
        assert_eq!(c.manifest.stale_count, small().stale_count());
        assert_eq!(c.manifest.node_count, 30 + small().stale_count());
        assert!(c.samples.iter().all(|s| s.path.depth() >= 2));
        let ids: HashSet<&str> = c.samples.iter().map(|s| s.id.as_str()).collect();
        assert_eq!(ids.len(), 1000);
    }

    #[test]
    fn full_scale_shape() {
        let c = generate_synthetic(&SynthSpec::full_scale()).unwrap();
        assert_eq!(c.samples.len(), 8968);
        assert_eq!(c.manifest.category_count, 123);
        assert_eq!(c.manifest.node_count, 138);
        let d3 = c.manifest.depth_histogram[&3] as f64 / 8968.0;
        assert!(d3 > 0.8, "depth-3 share {d3}");
    }

    #[test]
    fn zero_overlap_is_disjoint() {
        let spec = SynthSpec {
            overlap: 0.0,
            ..small()
        };
        let c = generate_synthetic(&spec).unwrap();
        let mut seen = HashSet::new();
        for n in &c.manifest.nodes {
            for w in &n.vocabulary {
                assert!(seen.insert(w.clone()), "{w} shared");
            }
        }
    }

    #[test]
    fn infeasible_specs_rejected() {
        assert!(generate_synthetic(&SynthSpec { overlap: 1.5, ..small() }).is_err());
        assert!(generate_synthetic(&SynthSpec { samples: 10, ..small() }).is_err());
        let flat = SynthSpec {
            depth_weights: BTreeMap::from([(2, 1.0)]),
            stale_ratio: 1.0,
            ..small()
        };
        assert!(matches!(generate_synthetic(&flat), Err(Error::InvalidSynthSpec(_))));
    }
}
