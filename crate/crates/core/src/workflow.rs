//! End-to-end experiment runs and the incremental-update benchmark.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{
    majority_predict, predict_batch, predict_encoded, KnnIndex, LabelCounts, RandomBaseline, DEFAULT_TOP_K,
};
use crate::inference::baseline::DEFAULT_NEIGHBORS;
use crate::metrics::{evaluate, EvalInstance, EvalReport};
use crate::model::{encode_samples, EncodedSample, ModelConfig, ScoringStrategy, TrainTimings, TrainedModel};
use crate::pipeline::{stratified_split, to_training, CleanSample, SplitSpec};
use crate::representation::{DualVector, EmbedderDescriptor, SemanticEmbedder, TfidfModel};

/// Encodes and scores a labeled set against a trained model.
pub fn evaluate_model(
    model: &TrainedModel,
    embedder: &dyn SemanticEmbedder,
    samples: &[CleanSample],
    k: usize,
) -> Result<(EvalReport, Vec<EvalInstance>)> {
    let encoded = encode_samples(model.tfidf(), embedder, &to_training(samples))?;
    evaluate_encoded(model, &encoded, k)
}

pub fn evaluate_encoded(model: &TrainedModel, samples: &[EncodedSample], k: usize) -> Result<(EvalReport, Vec<EvalInstance>)> {
    let queries: Vec<DualVector> = samples.iter().map(|s| s.vector.clone()).collect();
    let predictions = predict_batch(model, &queries, k)?;
    let instances: Vec<EvalInstance> = samples
        .iter()
        .zip(&predictions)
        .map(|(s, p)| EvalInstance::from_prediction(s.path.clone(), p))
        .collect();
    Ok((evaluate(&instances, k)?, instances))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub split: SplitSpec,
    pub k: usize,
    pub baselines: bool,
    /// Pick the scoring strategy with the best validation H-F1.
    pub select_scoring: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::default(),
            split: SplitSpec::default(),
            k: DEFAULT_TOP_K,
            baselines: true,
            select_scoring: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: String,
    pub report: EvalReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRun {
    pub seed: u64,
    pub train: usize,
    pub validation: usize,
    pub test: usize,
    pub scoring: ScoringStrategy,
    pub embedding_time: Duration,
    pub centroid_time: Duration,
    pub methods: Vec<MethodReport>,
}

pub const DUAL_METHOD: &str = "dual-centroid";

/// One split, train, and evaluate cycle over already preprocessed samples.
pub fn run_experiment(samples: &[CleanSample], config: &ExperimentConfig, seed: u64) -> Result<ExperimentRun> {
    let split = stratified_split(
        samples,
        &SplitSpec {
            seed,
            ..config.split.clone()
        },
    )?;
    if split.test.is_empty() {
        return Err(Error::Data("test split is empty".into()));
    }
    let model_config = ModelConfig {
        seed,
        ..config.model.clone()
    };
    let (mut model, timings) = TrainedModel::train(&to_training(&split.train), &model_config)?;
    let embedder = model_config.embedder.build()?;
    if config.select_scoring && !split.validation.is_empty() {
        let val = encode_samples(model.tfidf(), embedder.as_ref(), &to_training(&split.validation))?;
        let mut best: Option<(ScoringStrategy, f64)> = None;
        for strategy in [ScoringStrategy::LeafOnly, ScoringStrategy::SimpleAverage, ScoringStrategy::Weighted] {
            model.set_scoring(strategy);
            let (r, _) = evaluate_encoded(&model, &val, config.k)?;
            if best.is_none_or(|(_, b)| r.h_f1 > b) {
                best = Some((strategy, r.h_f1));
            }
        }
        model.set_scoring(best.expect("three strategies").0);
    }
    let test = encode_samples(model.tfidf(), embedder.as_ref(), &to_training(&split.test))?;
    let (dual, _) = evaluate_encoded(&model, &test, config.k)?;
    let mut methods = vec![MethodReport {
        method: DUAL_METHOD.into(),
        report: dual,
    }];
    if config.baselines {
        let train = encode_samples(model.tfidf(), embedder.as_ref(), &to_training(&split.train))?;
        methods.extend(baseline_reports(&train, &test, config.k, seed)?);
    }
    Ok(ExperimentRun {
        seed,
        train: split.train.len(),
        validation: split.validation.len(),
        test: split.test.len(),
        scoring: model.config().scoring,
        embedding_time: timings.embedding + timings.tfidf_fit,
        centroid_time: timings.centroids,
        methods,
    })
}

pub fn baseline_reports(train: &[EncodedSample], test: &[EncodedSample], k: usize, seed: u64) -> Result<Vec<MethodReport>> {
    let truths = || test.iter().map(|s| s.path.clone());
    let knn = KnnIndex::new(train.to_vec());
    let knn_inst: Vec<EvalInstance> = {
        use rayon::prelude::*;
        test.par_iter()
            .map(|s| EvalInstance::from_prediction(s.path.clone(), &knn.predict(&s.vector, DEFAULT_NEIGHBORS, k)))
            .collect()
    };
    let counts = LabelCounts::from_paths(train.iter().map(|s| &s.path));
    let majority = majority_predict(&counts, k);
    let maj_inst: Vec<EvalInstance> = truths().map(|t| EvalInstance::from_prediction(t, &majority)).collect();
    let mut random = RandomBaseline::new(counts.labels(), seed);
    let rnd_inst: Vec<EvalInstance> = truths()
        .map(|t| EvalInstance::from_prediction(t, &random.next_prediction(k)))
        .collect();
    Ok(vec![
        MethodReport {
            method: "knn".into(),
            report: evaluate(&knn_inst, k)?,
        },
        MethodReport {
            method: "majority".into(),
            report: evaluate(&maj_inst, k)?,
        },
        MethodReport {
            method: "random".into(),
            report: evaluate(&rnd_inst, k)?,
        },
    ])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchConfig {
    /// Samples in the initial model; the rest of the corpus feeds update batches.
    pub base: usize,
    pub batch_sizes: Vec<usize>,
    pub repetitions: usize,
    pub inference_queries: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            base: 4000,
            batch_sizes: vec![1, 10, 100, 1000],
            repetitions: 5,
            inference_queries: 200,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub batch: usize,
    pub update: Duration,
    pub retrain: Duration,
    pub speedup: f64,
    pub recomputed_nodes: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub base: usize,
    pub repetitions: usize,
    pub base_training: Duration,
    pub rows: Vec<BenchRow>,
    pub inference_per_sample: Duration,
}

impl BenchReport {
    pub fn render(&self) -> String {
        let mut out = format!(
            "base model: {} samples, centroid training {:.3} ms (median of {})\ninference: {:.3} ms/sample\n\n",
            self.base,
            ms(self.base_training),
            self.repetitions,
            ms(self.inference_per_sample)
        );
        out.push_str(&format!("{:>6}  {:>12}  {:>12}  {:>9}  {:>6}\n", "batch", "update ms", "retrain ms", "speedup", "nodes"));
        for r in &self.rows {
            out.push_str(&format!(
                "{:>6}  {:>12.4}  {:>12.3}  {:>8.1}x  {:>6}\n",
                r.batch,
                ms(r.update),
                ms(r.retrain),
                r.speedup,
                r.recomputed_nodes
            ));
        }
        out
    }
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

fn median(mut v: Vec<Duration>) -> Duration {
    v.sort();
    let n = v.len();
    if n == 0 {
        Duration::ZERO
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2
    }
}

/// Times incremental updates against full centroid retraining on
/// pre-encoded samples, so embedding cost is excluded from both sides. For
/// each batch size `b`, the update adds the first `b` held-out samples to the
/// base model and the retrain fits base plus those same samples.
pub fn incremental_bench(
    samples: &[EncodedSample],
    tfidf: &TfidfModel,
    embedder: &EmbedderDescriptor,
    config: &ModelConfig,
    bench: &BenchConfig,
) -> Result<BenchReport> {
    let max_batch = bench.batch_sizes.iter().copied().max().unwrap_or(0);
    if bench.base == 0 || bench.base + max_batch > samples.len() {
        return Err(Error::Config(format!(
            "benchmark needs {} base plus {} update samples, corpus has {}",
            bench.base,
            max_batch,
            samples.len()
        )));
    }
    let reps = bench.repetitions.max(1);
    let (base, pool) = samples.split_at(bench.base);
    let train = |s: &[EncodedSample]| TrainedModel::train_encoded(s, config, tfidf.clone(), embedder.clone());

    let mut base_times = Vec::with_capacity(reps);
    let mut model = None;
    for _ in 0..reps {
        let start = Instant::now();
        let m = train(base)?;
        base_times.push(start.elapsed());
        model = Some(m);
    }
    let model = model.expect("at least one repetition");

    let mut rows = Vec::new();
    for &b in &bench.batch_sizes {
        let batch = &pool[..b];
        let combined: Vec<EncodedSample> = base.iter().chain(batch).cloned().collect();
        let mut update_times = Vec::with_capacity(reps);
        let mut retrain_times = Vec::with_capacity(reps);
        let mut recomputed = 0;
        for _ in 0..reps {
            let mut fresh = model.clone();
            let start = Instant::now();
            let report = fresh.incremental_update_encoded(batch)?;
            update_times.push(start.elapsed());
            recomputed = report.recomputed.len();

            let start = Instant::now();
            let retrained = train(&combined)?;
            retrain_times.push(start.elapsed());
            drop(retrained);
        }
        let update = median(update_times);
        let retrain = median(retrain_times);
        rows.push(BenchRow {
            batch: b,
            update,
            retrain,
            speedup: retrain.as_secs_f64() / update.as_secs_f64().max(1e-9),
            recomputed_nodes: recomputed,
        });
    }

    let n_queries = bench.inference_queries.min(pool.len()).max(1);
    let start = Instant::now();
    for s in pool.iter().take(n_queries) {
        predict_encoded(&model, &s.vector, DEFAULT_TOP_K)?;
    }
    let inference_per_sample = start.elapsed() / n_queries as u32;

    Ok(BenchReport {
        base: bench.base,
        repetitions: reps,
        base_training: median(base_times),
        rows,
        inference_per_sample,
    })
}

/// Training timings in the shape reported to operators.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub tfidf_fit_ms: f64,
    pub embedding_ms: f64,
    pub centroid_ms: f64,
}

impl From<TrainTimings> for TimingReport {
    fn from(t: TrainTimings) -> Self {
        Self {
            tfidf_fit_ms: ms(t.tfidf_fit),
            embedding_ms: ms(t.embedding),
            centroid_ms: ms(t.centroids),
        }
    }
}
