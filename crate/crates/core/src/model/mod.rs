//! Dual-centroid training over the taxonomy, incremental updates, and persistence.
//!
//! Each node's centroid input (its *pool*) is:
//! - its direct samples, when it has any, plus a seeded sample of each child
//!   subtree when child sampling is enabled;
//! - every sample in its subtree, when it is stale.
//!
//! Pools are kept as running sums so single-centroid nodes can absorb new
//! samples without revisiting old ones.

pub mod centroid;
pub mod cluster;
pub mod config;
pub mod persist;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::time::{Duration, Instant};

use rayon::prelude::*;

pub use centroid::{Centroid, CentroidSet, NodeCentroids};
pub use config::{ChildSamplingConfig, EmbedderConfig, ModelConfig, MultiCentroidConfig, ScoringStrategy};

use crate::error::{Error, Result};
use crate::representation::embed::{fnv1a, splitmix64};
use crate::representation::{
    encode_batch, DualVector, EmbedderDescriptor, SemanticEmbedder, TfidfModel, View, ViewVector,
};
use crate::taxonomy::{CategoryPath, TaxonomyTree};

/// A labeled document before encoding.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingSample {
    pub id: Option<String>,
    pub text: String,
    pub path: CategoryPath,
}

impl TrainingSample {
    pub fn new(text: impl Into<String>, path: CategoryPath) -> Self {
        Self {
            id: None,
            text: text.into(),
            path,
        }
    }
}

/// A labeled document already encoded in both views.
#[derive(Clone, Debug, PartialEq)]
pub struct EncodedSample {
    pub vector: DualVector,
    pub path: CategoryPath,
}

/// Encoded training samples retained for child-sampled nodes, whose pools
/// must be redrawn when a child subtree grows.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SampleStore {
    pub(crate) entries: Vec<(u64, EncodedSample)>,
}

impl SampleStore {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TrainTimings {
    pub tfidf_fit: Duration,
    pub embedding: Duration,
    pub centroids: Duration,
}

/// What an incremental update touched.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct UpdateReport {
    pub samples: usize,
    pub created: Vec<CategoryPath>,
    pub recomputed: Vec<CategoryPath>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainedModel {
    pub(crate) config: ModelConfig,
    pub(crate) tfidf: TfidfModel,
    pub(crate) embedder: EmbedderDescriptor,
    pub(crate) tree: TaxonomyTree,
    pub(crate) nodes: BTreeMap<String, NodeCentroids>,
    pub(crate) store: Option<SampleStore>,
    pub(crate) next_ordinal: u64,
    pub(crate) targets: Vec<CategoryPath>,
}

impl TrainedModel {
    /// Fits TF-IDF on the sample texts, builds the configured embedder, and trains.
    pub fn train(samples: &[TrainingSample], config: &ModelConfig) -> Result<(Self, TrainTimings)> {
        config.validate()?;
        if samples.is_empty() {
            return Err(Error::EmptyTrainingSet);
        }
        let start = Instant::now();
        let texts: Vec<&str> = samples.iter().map(|s| s.text.as_str()).collect();
        let tfidf = TfidfModel::fit(&texts, &config.tfidf)?;
        let tfidf_fit = start.elapsed();
        let embedder = config.embedder.build()?;
        let (model, mut timings) = Self::train_with(samples, config, tfidf, embedder.as_ref())?;
        timings.tfidf_fit = tfidf_fit;
        Ok((model, timings))
    }

    /// Trains with an already fitted vectorizer and embedder.
    pub fn train_with(
        samples: &[TrainingSample],
        config: &ModelConfig,
        tfidf: TfidfModel,
        embedder: &dyn SemanticEmbedder,
    ) -> Result<(Self, TrainTimings)> {
        let start = Instant::now();
        let encoded = encode_samples(&tfidf, embedder, samples)?;
        let embedding = start.elapsed();
        let start = Instant::now();
        let model = Self::train_encoded(&encoded, config, tfidf, embedder.descriptor())?;
        let timings = TrainTimings {
            tfidf_fit: Duration::ZERO,
            embedding,
            centroids: start.elapsed(),
        };
        Ok((model, timings))
    }

    /// The centroid phase alone, on pre-encoded samples.
    pub fn train_encoded(
        samples: &[EncodedSample],
        config: &ModelConfig,
        tfidf: TfidfModel,
        embedder: EmbedderDescriptor,
    ) -> Result<Self> {
        config.validate()?;
        if samples.is_empty() {
            return Err(Error::EmptyTrainingSet);
        }
        let lex_dim = tfidf.dimension();
        let sem_dim = embedder.dimension();
        check_dims(samples, lex_dim, sem_dim)?;

        let tree = TaxonomyTree::from_paths(samples.iter().map(|s| &s.path));
        let mut direct: HashMap<String, Vec<usize>> = HashMap::new();
        for (i, s) in samples.iter().enumerate() {
            direct.entry(s.path.render()).or_default().push(i);
        }

        // Post-order: child subtrees are final before a parent's pool is formed.
        let mut subtree: HashMap<String, Vec<usize>> = HashMap::with_capacity(tree.len());
        let mut pools: Vec<(String, Vec<usize>)> = Vec::with_capacity(tree.len());
        for node in tree.post_order() {
            let key = node.path().render();
            let own = direct.get(&key).cloned().unwrap_or_default();
            let mut all = own.clone();
            for c in node.children() {
                all.extend_from_slice(&subtree[c]);
            }
            let pool = if own.is_empty() {
                all.clone()
            } else if config.child_sampling.enabled && node.has_children() {
                let children: Vec<&[usize]> = node.children().map(|c| subtree[c].as_slice()).collect();
                let ordinals: Vec<u64> = (0..samples.len() as u64).collect();
                sampled_pool(&key, &own, &children, &ordinals, config)
            } else {
                own
            };
            subtree.insert(key.clone(), all);
            pools.push((key, pool));
        }

        let nodes: BTreeMap<String, NodeCentroids> = pools
            .into_par_iter()
            .map(|(key, pool)| {
                let docs: Vec<&DualVector> = pool.iter().map(|&i| &samples[i].vector).collect();
                let centroids = NodeCentroids {
                    lexical: build_set(View::Lexical, &docs, lex_dim, config),
                    semantic: build_set(View::Semantic, &docs, sem_dim, config),
                };
                (key, centroids)
            })
            .collect();

        for (key, nc) in &nodes {
            if nc.lexical.centroids().iter().all(Centroid::is_degenerate)
                && nc.semantic.centroids().iter().all(Centroid::is_degenerate)
            {
                log::warn!("category {key} has zero centroids in both views");
            }
        }

        let store = config.child_sampling.enabled.then(|| SampleStore {
            entries: samples
                .iter()
                .enumerate()
                .map(|(i, s)| (i as u64, s.clone()))
                .collect(),
        });
        let targets = tree.enumerate_paths();
        Ok(Self {
            config: config.clone(),
            tfidf,
            embedder,
            tree,
            nodes,
            store,
            next_ordinal: samples.len() as u64,
            targets,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn tfidf(&self) -> &TfidfModel {
        &self.tfidf
    }

    pub fn embedder_descriptor(&self) -> &EmbedderDescriptor {
        &self.embedder
    }

    pub fn tree(&self) -> &TaxonomyTree {
        &self.tree
    }

    /// Predictable category paths, lexicographic.
    pub fn targets(&self) -> &[CategoryPath] {
        &self.targets
    }

    pub fn centroids(&self, path: &CategoryPath) -> Option<&NodeCentroids> {
        self.nodes.get(&path.render())
    }

    pub fn node_centroids(&self) -> impl Iterator<Item = (&str, &NodeCentroids)> {
        self.nodes.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn sample_store(&self) -> Option<&SampleStore> {
        self.store.as_ref()
    }

    pub fn lexical_dimension(&self) -> usize {
        self.tfidf.dimension()
    }

    pub fn semantic_dimension(&self) -> usize {
        self.embedder.dimension()
    }

    /// Override the scoring strategy used at inference (e.g. after validation-set selection).
    pub fn set_scoring(&mut self, strategy: ScoringStrategy) {
        self.config.scoring = strategy;
    }

    pub fn set_rrf_k(&mut self, k: f64) -> Result<()> {
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::Config("rrf_k must be a positive finite number".into()));
        }
        self.config.rrf_k = k;
        Ok(())
    }

    /// Encodes with the frozen vectorizer and the given embedder, then updates.
    pub fn incremental_update(
        &mut self,
        samples: &[TrainingSample],
        embedder: &dyn SemanticEmbedder,
    ) -> Result<UpdateReport> {
        if embedder.dimension() != self.semantic_dimension() {
            return Err(Error::DimensionMismatch {
                expected: self.semantic_dimension(),
                found: embedder.dimension(),
            });
        }
        let encoded = encode_samples(&self.tfidf, embedder, samples)?;
        self.incremental_update_encoded(&encoded)
    }

    /// Adds pre-encoded samples, recomputing only the nodes whose pools change.
    /// On error the model is left untouched.
    pub fn incremental_update_encoded(&mut self, samples: &[EncodedSample]) -> Result<UpdateReport> {
        check_dims(samples, self.lexical_dimension(), self.semantic_dimension())?;
        if samples.is_empty() {
            return Ok(UpdateReport::default());
        }
        let sampling = self.config.child_sampling.enabled;

        // Direct counts after the update, for every node on a batch path.
        let mut direct_after: HashMap<String, u64> = HashMap::new();
        for s in samples {
            for a in s.path.ancestors() {
                let key = a.render();
                direct_after
                    .entry(key.clone())
                    .or_insert_with(|| self.tree.get(&key).map_or(0, |n| n.direct_sample_count()));
            }
            *direct_after.get_mut(&s.path.render()).expect("inserted above") += 1;
        }
        let stale_after = |key: &str| direct_after[key] == 0;

        let mut affected: BTreeSet<String> = BTreeSet::new();
        let mut resample: BTreeSet<String> = BTreeSet::new();
        for s in samples {
            let terminal = s.path.render();
            affected.insert(terminal.clone());
            for a in s.path.ancestors().take(s.path.depth() - 1) {
                let key = a.render();
                if stale_after(&key) {
                    affected.insert(key);
                } else if sampling {
                    resample.insert(key);
                }
            }
            // a terminal node that already has (or will have) children is child-sampled too
            if sampling && self.tree.get(&terminal).is_some_and(|n| n.has_children()) {
                resample.insert(terminal);
            }
        }
        let mut incremental: BTreeSet<String> = affected.difference(&resample).cloned().collect();
        if sampling && self.store.is_none() {
            return Err(Error::MissingSampleStore {
                nodes: resample.into_iter().collect(),
            });
        }

        let was_stale: BTreeSet<&str> = direct_after
            .keys()
            .filter(|k| self.tree.get(k).is_some_and(|n| n.direct_sample_count() == 0))
            .map(String::as_str)
            .collect();
        let switches_pool = |key: &str| was_stale.contains(key) && !stale_after(key);

        if self.config.multi_centroid.enabled {
            let threshold = self.config.multi_centroid.min_samples_threshold as u64;
            let mut added: HashMap<String, u64> = HashMap::new();
            for s in samples {
                let terminal = s.path.render();
                for a in s.path.ancestors() {
                    let key = a.render();
                    if key == terminal || stale_after(&key) {
                        *added.entry(key).or_insert(0) += 1;
                    }
                }
            }
            let mut conflicts: Vec<String> = Vec::new();
            for key in &incremental {
                let existing = self.nodes.get(key);
                let base = match existing {
                    Some(nc) if !switches_pool(key) => nc.lexical.pool_count(),
                    _ => 0,
                };
                let projected = base + added.get(key).copied().unwrap_or(0);
                if existing.is_some_and(NodeCentroids::is_clustered) || projected > threshold {
                    conflicts.push(key.clone());
                }
            }
            // redrawn pools may cross the clustering threshold; not handled incrementally
            conflicts.extend(resample.iter().cloned());
            if !conflicts.is_empty() {
                conflicts.sort();
                return Err(Error::RequiresRecluster { nodes: conflicts });
            }
        }

        // --- mutation starts; nothing below can fail ---
        let lex_dim = self.lexical_dimension();
        let sem_dim = self.semantic_dimension();
        let mut created = Vec::new();
        for s in samples {
            for key in self.tree.ensure_node(&s.path) {
                created.push(CategoryPath::parse(&key).expect("tree keys are canonical"));
            }
            self.tree.insert_sample(&s.path);
        }
        for key in &incremental {
            let entry = self
                .nodes
                .entry(key.clone())
                .or_insert_with(|| NodeCentroids::empty(lex_dim, sem_dim));
            if switches_pool(key) {
                entry.lexical.reset_pool();
                entry.semantic.reset_pool();
            }
        }
        for s in samples {
            let terminal = s.path.render();
            for a in s.path.ancestors() {
                let key = a.render();
                let pooled = key == terminal || stale_after(&key);
                if pooled && incremental.contains(&key) {
                    let nc = self.nodes.get_mut(&key).expect("initialized above");
                    for view in View::ALL {
                        nc.view_mut(view).add(&ViewVector::of(&s.vector, view));
                    }
                }
            }
        }
        for key in &incremental {
            let nc = self.nodes.get_mut(key).expect("initialized above");
            nc.lexical.refresh_mean();
            nc.semantic.refresh_mean();
        }

        if sampling {
            let store = self.store.as_mut().expect("checked above");
            for s in samples {
                store.entries.push((self.next_ordinal, s.clone()));
                self.next_ordinal += 1;
            }
            for key in &resample {
                let nc = self.recompute_sampled(key);
                self.nodes.insert(key.clone(), nc);
            }
        } else {
            self.next_ordinal += samples.len() as u64;
        }
        incremental.extend(resample);
        self.targets = self.tree.enumerate_paths();
        Ok(UpdateReport {
            samples: samples.len(),
            created,
            recomputed: incremental
                .into_iter()
                .map(|k| CategoryPath::parse(&k).expect("tree keys are canonical"))
                .collect(),
        })
    }

    /// Rebuilds a child-sampled node's pool from the sample store.
    fn recompute_sampled(&self, key: &str) -> NodeCentroids {
        let store = self.store.as_ref().expect("sampling models keep a store");
        let node = self.tree.get(key).expect("node exists");
        let path = node.path();
        let mut own = Vec::new();
        let mut by_child: BTreeMap<&str, Vec<usize>> = node.children().map(|c| (c, Vec::new())).collect();
        for (i, (_, s)) in store.entries.iter().enumerate() {
            if &s.path == path {
                own.push(i);
            } else if path.is_ancestor_of(&s.path) {
                let child_key = s.path.prefix(path.depth() + 1).expect("descendant").render();
                if let Some(v) = by_child.get_mut(child_key.as_str()) {
                    v.push(i);
                }
            }
        }
        let ordinals: Vec<u64> = store.entries.iter().map(|(o, _)| *o).collect();
        let children: Vec<&[usize]> = by_child.values().map(Vec::as_slice).collect();
        let pool = sampled_pool(key, &own, &children, &ordinals, &self.config);
        let docs: Vec<&DualVector> = pool.iter().map(|&i| &store.entries[i].1.vector).collect();
        NodeCentroids {
            lexical: build_set(View::Lexical, &docs, self.lexical_dimension(), &self.config),
            semantic: build_set(View::Semantic, &docs, self.semantic_dimension(), &self.config),
        }
    }
}

pub fn encode_samples(
    tfidf: &TfidfModel,
    embedder: &dyn SemanticEmbedder,
    samples: &[TrainingSample],
) -> Result<Vec<EncodedSample>> {
    let vectors = encode_batch(
        tfidf,
        embedder,
        samples.par_iter().map(|s| (s.id.as_deref(), s.text.as_str())),
    )?;
    Ok(vectors
        .into_iter()
        .zip(samples)
        .map(|(vector, s)| EncodedSample {
            vector,
            path: s.path.clone(),
        })
        .collect())
}

fn check_dims(samples: &[EncodedSample], lex_dim: usize, sem_dim: usize) -> Result<()> {
    for s in samples {
        if s.vector.lexical.dimension() != lex_dim {
            return Err(Error::DimensionMismatch {
                expected: lex_dim,
                found: s.vector.lexical.dimension(),
            });
        }
        if s.vector.semantic.dimension() != sem_dim {
            return Err(Error::DimensionMismatch {
                expected: sem_dim,
                found: s.vector.semantic.dimension(),
            });
        }
    }
    Ok(())
}

/// Direct members plus `round(p * |subtree|)` members of each child subtree,
/// chosen by a seeded hash rank so the draw does not depend on input order.
/// Output is sorted by position.
pub(crate) fn sampled_pool(
    node_key: &str,
    own: &[usize],
    child_subtrees: &[&[usize]],
    ordinals: &[u64],
    config: &ModelConfig,
) -> Vec<usize> {
    let p = config.child_sampling.proportion;
    let salt = config.seed ^ fnv1a(node_key.as_bytes());
    let mut pool = own.to_vec();
    for members in child_subtrees {
        let take = (p * members.len() as f64).round() as usize;
        if take == 0 {
            continue;
        }
        let mut ranked: Vec<(u64, u64, usize)> = members
            .iter()
            .map(|&i| (splitmix64(salt ^ splitmix64(ordinals[i])), ordinals[i], i))
            .collect();
        ranked.sort_unstable();
        pool.extend(ranked.into_iter().take(take).map(|(_, _, i)| i));
    }
    pool.sort_unstable();
    pool
}

fn build_set(view: View, docs: &[&DualVector], dim: usize, config: &ModelConfig) -> CentroidSet {
    let mut set = CentroidSet::empty(dim);
    let views: Vec<ViewVector> = docs.iter().map(|d| ViewVector::of(d, view)).collect();
    for v in &views {
        set.add(v);
    }
    let mc = &config.multi_centroid;
    if mc.enabled && views.len() > mc.min_samples_threshold {
        if let Some(clustering) = cluster::cluster_node(&views, mc.max_clusters) {
            let centroids = clustering
                .members
                .iter()
                .map(|m| {
                    let mut sum = vec![0.0; dim];
                    for &i in m {
                        views[i].add_to(&mut sum);
                    }
                    Centroid::from_sum(&sum, m.len() as u64)
                })
                .collect();
            set.set_centroids(centroids);
            return set;
        }
    }
    set.refresh_mean();
    set
}
