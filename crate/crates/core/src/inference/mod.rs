//! Path scoring, per-view ranking, reciprocal rank fusion, and top-k output.

pub mod baseline;

use std::cmp::Ordering;
use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use baseline::{majority_predict, random_predict, KnnIndex, LabelCounts, RandomBaseline};

use crate::error::{Error, Result};
use crate::model::{CentroidSet, ScoringStrategy, TrainedModel};
use crate::representation::{encode, DualVector, SemanticEmbedder, View, ViewVector};
use crate::taxonomy::CategoryPath;

pub const DEFAULT_TOP_K: usize = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeSimilarity {
    pub path: CategoryPath,
    pub similarity: f64,
}

/// One path's score in one view, with the similarity of every node on it
/// (outermost first).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathScore {
    pub path: CategoryPath,
    pub nodes: Vec<NodeSimilarity>,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathTrace {
    pub lexical: PathScore,
    pub semantic: PathScore,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionEntry {
    pub path: CategoryPath,
    pub score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lexical_rank: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub semantic_rank: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<PathTrace>,
}

impl PredictionEntry {
    pub fn plain(path: CategoryPath, score: f64) -> Self {
        Self {
            path,
            score,
            lexical_rank: None,
            semantic_rank: None,
            trace: None,
        }
    }
}

/// Ranked candidates for one query, best first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankedPrediction {
    pub k: usize,
    pub entries: Vec<PredictionEntry>,
}

impl RankedPrediction {
    pub fn top(&self) -> Option<&CategoryPath> {
        self.entries.first().map(|e| &e.path)
    }

    pub fn paths(&self) -> impl Iterator<Item = &CategoryPath> {
        self.entries.iter().map(|e| &e.path)
    }
}

/// A fused candidate before traces are attached.
#[derive(Clone, Debug, PartialEq)]
pub struct FusedEntry {
    pub path: CategoryPath,
    pub score: f64,
    pub lexical_rank: usize,
    pub semantic_rank: usize,
}

pub fn node_similarity(query: &ViewVector<'_>, node: &CentroidSet) -> f64 {
    node.max_similarity(query, query.norm())
}

/// Combines root-to-node similarities into one score.
pub fn path_score(similarities: &[f64], strategy: ScoringStrategy, depth_weight_exponent: f64) -> f64 {
    let d = similarities.len();
    if d == 0 {
        return 0.0;
    }
    match strategy {
        ScoringStrategy::LeafOnly => similarities[d - 1],
        ScoringStrategy::SimpleAverage => similarities.iter().sum::<f64>() / d as f64,
        ScoringStrategy::Weighted => {
            let weights: Vec<f64> = (1..=d).map(|i| (i as f64).powf(depth_weight_exponent)).collect();
            let total: f64 = weights.iter().sum();
            similarities.iter().zip(&weights).map(|(s, w)| s * w).sum::<f64>() / total
        }
    }
}

/// Descending by score, ties lexicographic by path.
fn by_score_then_path(a: (&CategoryPath, f64), b: (&CategoryPath, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0))
}

/// Scores every predictable path in one view, in the model's target order.
pub fn score_paths(model: &TrainedModel, query: &DualVector, view: View) -> Vec<PathScore> {
    let q = ViewVector::of(query, view);
    let qnorm = q.norm();
    let sims: HashMap<&str, f64> = model
        .node_centroids()
        .map(|(key, nc)| (key, nc.view(view).max_similarity(&q, qnorm)))
        .collect();
    let cfg = model.config();
    model
        .targets()
        .iter()
        .map(|path| {
            let nodes: Vec<NodeSimilarity> = path
                .ancestors()
                .map(|a| {
                    let similarity = sims[a.render().as_str()];
                    NodeSimilarity { path: a, similarity }
                })
                .collect();
            let values: Vec<f64> = nodes.iter().map(|n| n.similarity).collect();
            PathScore {
                path: path.clone(),
                score: path_score(&values, cfg.scoring, cfg.depth_weight_exponent),
                nodes,
            }
        })
        .collect()
}

/// Sorts (path, score) pairs best first; position + 1 is the rank.
pub fn rank_scores(scores: &mut [(CategoryPath, f64)]) {
    scores.sort_by(|a, b| by_score_then_path((&a.0, a.1), (&b.0, b.1)));
}

pub fn rank_view(model: &TrainedModel, query: &DualVector, view: View) -> Vec<(CategoryPath, f64)> {
    let mut scored: Vec<(CategoryPath, f64)> = score_paths(model, query, view)
        .into_iter()
        .map(|p| (p.path, p.score))
        .collect();
    rank_scores(&mut scored);
    scored
}

/// Fuses two rankings (best first) of the same path set by reciprocal rank.
pub fn rrf_fuse(lexical: &[CategoryPath], semantic: &[CategoryPath], rrf_k: f64) -> Result<Vec<FusedEntry>> {
    if lexical.len() != semantic.len() {
        return Err(Error::Internal("rankings cover different path sets".into()));
    }
    let sem_rank: HashMap<&CategoryPath, usize> = semantic.iter().enumerate().map(|(i, p)| (p, i + 1)).collect();
    if sem_rank.len() != semantic.len() {
        return Err(Error::Internal("semantic ranking repeats a path".into()));
    }
    let mut fused = Vec::with_capacity(lexical.len());
    for (i, path) in lexical.iter().enumerate() {
        let lexical_rank = i + 1;
        let semantic_rank = *sem_rank
            .get(path)
            .ok_or_else(|| Error::Internal(format!("path {path} missing from semantic ranking")))?;
        fused.push(FusedEntry {
            path: path.clone(),
            score: 1.0 / (rrf_k + lexical_rank as f64) + 1.0 / (rrf_k + semantic_rank as f64),
            lexical_rank,
            semantic_rank,
        });
    }
    if fused.len() != sem_rank.len() {
        return Err(Error::Internal("lexical ranking repeats a path".into()));
    }
    fused.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then(a.semantic_rank.cmp(&b.semantic_rank))
            .then_with(|| a.path.cmp(&b.path))
    });
    Ok(fused)
}

/// Full prediction for an already encoded query.
pub fn predict_encoded(model: &TrainedModel, query: &DualVector, k: usize) -> Result<RankedPrediction> {
    if k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    let lexical = score_paths(model, query, View::Lexical);
    let semantic = score_paths(model, query, View::Semantic);
    let order = |scores: &[PathScore]| {
        let mut pairs: Vec<(CategoryPath, f64)> = scores.iter().map(|p| (p.path.clone(), p.score)).collect();
        rank_scores(&mut pairs);
        pairs.into_iter().map(|(p, _)| p).collect::<Vec<_>>()
    };
    let fused = rrf_fuse(&order(&lexical), &order(&semantic), model.config().rrf_k)?;
    let index: HashMap<&CategoryPath, usize> = model.targets().iter().enumerate().map(|(i, p)| (p, i)).collect();
    let entries = fused
        .into_iter()
        .take(k)
        .map(|f| {
            let i = index[&f.path];
            PredictionEntry {
                trace: Some(PathTrace {
                    lexical: lexical[i].clone(),
                    semantic: semantic[i].clone(),
                }),
                path: f.path,
                score: f.score,
                lexical_rank: Some(f.lexical_rank),
                semantic_rank: Some(f.semantic_rank),
            }
        })
        .collect();
    Ok(RankedPrediction { k, entries })
}

pub fn predict(
    model: &TrainedModel,
    embedder: &dyn SemanticEmbedder,
    id: Option<&str>,
    text: &str,
    k: usize,
) -> Result<RankedPrediction> {
    let query = encode(model.tfidf(), embedder, id, text)?;
    predict_encoded(model, &query, k)
}

/// Predictions for many encoded queries; output order matches input order.
pub fn predict_batch(model: &TrainedModel, queries: &[DualVector], k: usize) -> Result<Vec<RankedPrediction>> {
    queries.par_iter().map(|q| predict_encoded(model, q, k)).collect()
}

/// Shared handle for concurrent readers. Updates apply to a copy which is
/// swapped in whole, so readers see either the old model or the new one.
#[derive(Debug)]
pub struct ModelHandle {
    inner: RwLock<Arc<TrainedModel>>,
}

impl ModelHandle {
    pub fn new(model: TrainedModel) -> Self {
        Self {
            inner: RwLock::new(Arc::new(model)),
        }
    }

    pub fn snapshot(&self) -> Arc<TrainedModel> {
        Arc::clone(&self.inner.read().expect("model lock poisoned"))
    }

    /// Runs `f` on a copy of the current model and publishes it if `f` succeeds.
    pub fn update<T>(&self, f: impl FnOnce(&mut TrainedModel) -> Result<T>) -> Result<T> {
        let mut guard = self.inner.write().expect("model lock poisoned");
        let mut next = TrainedModel::clone(&guard);
        let out = f(&mut next)?;
        *guard = Arc::new(next);
        Ok(out)
    }
}
