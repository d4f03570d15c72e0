use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::representation::embed::{HashEmbedder, PrecomputedEmbedder, SemanticEmbedder, DEFAULT_DIMENSION};
use crate::representation::TfidfConfig;

/// How per-node similarities along a path are combined into a path score.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScoringStrategy {
    #[default]
    LeafOnly,
    SimpleAverage,
    Weighted,
}

impl std::str::FromStr for ScoringStrategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "leaf-only" | "leaf_only" => Ok(Self::LeafOnly),
            "simple-average" | "simple_average" => Ok(Self::SimpleAverage),
            "weighted" => Ok(Self::Weighted),
            other => Err(Error::Config(format!("unknown scoring strategy {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MultiCentroidConfig {
    pub enabled: bool,
    /// Nodes whose pool holds more samples than this are clustered.
    pub min_samples_threshold: usize,
    pub max_clusters: usize,
}

impl Default for MultiCentroidConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            min_samples_threshold: 50,
            max_clusters: 5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChildSamplingConfig {
    pub enabled: bool,
    pub proportion: f64,
}

impl Default for ChildSamplingConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            proportion: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EmbedderConfig {
    Hash { dimension: usize, seed: u64 },
    Precomputed { path: String },
}

impl Default for EmbedderConfig {
    fn default() -> Self {
        EmbedderConfig::Hash {
            dimension: DEFAULT_DIMENSION,
            seed: 0x5eed,
        }
    }
}

impl EmbedderConfig {
    pub fn build(&self) -> Result<Box<dyn SemanticEmbedder>> {
        match self {
            EmbedderConfig::Hash { dimension, seed } => Ok(Box::new(HashEmbedder::new(*dimension, *seed)?)),
            EmbedderConfig::Precomputed { path } => Ok(Box::new(PrecomputedEmbedder::load(path.as_ref())?)),
        }
    }
}

/// Training and inference configuration. Defaults are single centroids,
/// no child sampling, leaf-only scoring, and `rrf_k = 40`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub scoring: ScoringStrategy,
    /// Weighted scoring uses `w_i ∝ i^exponent` for node depth `i`; 1.0 is linear.
    pub depth_weight_exponent: f64,
    pub rrf_k: f64,
    pub multi_centroid: MultiCentroidConfig,
    pub child_sampling: ChildSamplingConfig,
    pub tfidf: TfidfConfig,
    pub embedder: EmbedderConfig,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            scoring: ScoringStrategy::LeafOnly,
            depth_weight_exponent: 1.0,
            rrf_k: 40.0,
            multi_centroid: MultiCentroidConfig::default(),
            child_sampling: ChildSamplingConfig::default(),
            tfidf: TfidfConfig::default(),
            embedder: EmbedderConfig::default(),
            seed: 42,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rrf_k > 0.0 && self.rrf_k.is_finite()) {
            return Err(Error::Config("rrf_k must be a positive finite number".into()));
        }
        if !(self.depth_weight_exponent > 0.0 && self.depth_weight_exponent.is_finite()) {
            return Err(Error::Config("depth_weight_exponent must be positive".into()));
        }
        if self.multi_centroid.enabled && self.multi_centroid.max_clusters < 2 {
            return Err(Error::Config("multi_centroid.max_clusters must be at least 2".into()));
        }
        let p = self.child_sampling.proportion;
        if self.child_sampling.enabled && !(p > 0.0 && p <= 1.0) {
            return Err(Error::Config("child_sampling.proportion must be in (0, 1]".into()));
        }
        self.tfidf.validate()
    }
}
