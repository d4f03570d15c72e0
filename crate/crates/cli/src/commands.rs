use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use clap::Args;
use serde::Serialize;

use centroid_htc::inference::{predict, RankedPrediction};
use centroid_htc::metrics::{aggregate_runs, render_table, AggregateReport, EvalInstance, EvalReport};
use centroid_htc::model::{encode_samples, EmbedderConfig, ScoringStrategy, UpdateReport};
use centroid_htc::pipeline::{
    clean, generate_synthetic, ingest_path, prepare, stratified_split, to_training, write_rejects_csv,
    write_samples_csv, CleanSample, PrepareReport, SynthManifest, SynthSpec,
};
use centroid_htc::representation::{SemanticEmbedder, TfidfModel};
use centroid_htc::taxonomy::TreeCounts;
use centroid_htc::workflow::{
    evaluate_model, incremental_bench, run_experiment, BenchReport, ExperimentConfig, ExperimentRun, TimingReport,
    DUAL_METHOD,
};
use centroid_htc::{CategoryPath, Error, TrainedModel};

use crate::config::RunConfig;
use crate::io::{self, model_embedder, read_queries, ModelLock, Query};
use crate::UsageError;

fn ms(d: std::time::Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

fn load_model(path: &Path) -> Result<TrainedModel> {
    TrainedModel::load(path).with_context(|| format!("loading model {}", path.display()))
}

/// Ingest and clean a labeled file without touching the label space.
fn labeled_samples(path: &Path) -> Result<Vec<CleanSample>> {
    let ingested = ingest_path(path).with_context(|| format!("ingest {}", path.display()))?;
    if !ingested.rejects.is_empty() {
        log::warn!("{}: {} records rejected at ingest", path.display(), ingested.rejects.len());
    }
    Ok(clean(&ingested.tickets))
}

fn depth_histogram(samples: &[CleanSample]) -> BTreeMap<usize, usize> {
    let mut hist = BTreeMap::new();
    for s in samples {
        *hist.entry(s.path.depth()).or_insert(0) += 1;
    }
    hist
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Labeled tickets (CSV, TSV or JSONL with id, title, description, category).
    #[arg(long)]
    pub data: PathBuf,
    /// Where to write the model file.
    #[arg(long)]
    pub model: PathBuf,
    /// Directory for split files and the training report (default: next to the model).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Precomputed semantic embeddings keyed by ticket id.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[arg(long)]
    pub scoring: Option<ScoringStrategy>,
    #[arg(long)]
    pub min_samples: Option<usize>,
    #[arg(long)]
    pub max_per_category: Option<usize>,
}

impl TrainArgs {
    pub fn apply(&self, cfg: &mut RunConfig) {
        if let Some(p) = &self.embeddings {
            cfg.model.embedder = EmbedderConfig::Precomputed {
                path: p.display().to_string(),
            };
        }
        if let Some(s) = self.scoring {
            cfg.model.scoring = s;
        }
        if let Some(n) = self.min_samples {
            cfg.preprocess.min_samples = n;
        }
        if let Some(n) = self.max_per_category {
            cfg.preprocess.max_per_category = n;
        }
    }
}

#[derive(Serialize)]
struct SplitSizes {
    train: usize,
    validation: usize,
    test: usize,
    warnings: Vec<String>,
}

#[derive(Serialize)]
struct TrainReport<'a> {
    config: &'a RunConfig,
    model: String,
    model_bytes: u64,
    ingested: usize,
    rejected: usize,
    preprocess: PrepareReport,
    split: SplitSizes,
    nodes: TreeCounts,
    targets: usize,
    /// Samples per category depth after preprocessing, all splits.
    dataset_depth_histogram: BTreeMap<usize, usize>,
    /// Samples per category depth in the training split.
    train_depth_histogram: BTreeMap<usize, u64>,
    timings: TimingReport,
}

pub fn train(cfg: &RunConfig, args: &TrainArgs) -> Result<()> {
    let ingested = ingest_path(&args.data).with_context(|| format!("ingest {}", args.data.display()))?;
    let (samples, preprocess) = prepare(&ingested.tickets, &cfg.preprocess, cfg.seed);
    let split = stratified_split(&samples, &cfg.split).context("split")?;
    for w in &split.warnings {
        log::warn!("split: {w}");
    }
    let (model, timings) = TrainedModel::train(&to_training(&split.train), &cfg.model).context("train")?;
    model.save(&args.model).with_context(|| format!("saving model {}", args.model.display()))?;

    let out = match &args.out {
        Some(d) => d.clone(),
        None => args.model.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    for (name, part) in [("train", &split.train), ("validation", &split.validation), ("test", &split.test)] {
        let mut w = io::create(&out.join(format!("{name}.csv")))?;
        write_samples_csv(&mut w, part)?;
        w.flush()?;
    }
    let mut w = io::create(&out.join("rejects.csv"))?;
    write_rejects_csv(&mut w, &ingested.rejects)?;
    w.flush()?;

    let report = TrainReport {
        config: cfg,
        model: args.model.display().to_string(),
        model_bytes: std::fs::metadata(&args.model)?.len(),
        ingested: ingested.tickets.len() + ingested.rejects.len(),
        rejected: ingested.rejects.len(),
        preprocess,
        split: SplitSizes {
            train: split.train.len(),
            validation: split.validation.len(),
            test: split.test.len(),
            warnings: split.warnings.clone(),
        },
        nodes: model.tree().counts(),
        targets: model.targets().len(),
        dataset_depth_histogram: depth_histogram(&samples),
        train_depth_histogram: model.tree().sample_depth_histogram(),
        timings: timings.into(),
    };
    io::write_json(&out.join("report.json"), &report)?;
    log::info!(
        "trained on {} samples: {} nodes, embedding {:.1} ms, centroids {:.1} ms",
        split.train.len(),
        report.nodes.nodes,
        report.timings.embedding_ms + report.timings.tfidf_fit_ms,
        report.timings.centroid_ms
    );
    let mut stdout = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut stdout, &report)?;
    writeln!(stdout)?;
    Ok(())
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// A single query text.
    #[arg(long, conflicts_with = "input", required_unless_present = "input")]
    pub text: Option<String>,
    /// Id for the single query, used to look up precomputed embeddings.
    #[arg(long, requires = "text")]
    pub id: Option<String>,
    /// Queries file (JSONL, CSV or TSV).
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(short, long)]
    pub k: Option<usize>,
    /// Output file for the JSONL records (default: stdout).
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Leave out per-node similarity traces.
    #[arg(long)]
    pub no_trace: bool,
}

#[derive(Serialize)]
struct PredictionRecord<'a> {
    #[serde(skip_serializing_if = "Option::is_none")]
    id: Option<&'a str>,
    #[serde(flatten)]
    prediction: RankedPrediction,
}

#[derive(Serialize)]
struct FailedQuery<'a> {
    #[serde(skip_serializing_if = "Option::is_none")]
    id: Option<&'a str>,
    error: String,
}

pub fn predict_cmd(cfg: &RunConfig, args: &PredictArgs) -> Result<()> {
    let model = load_model(&args.model)?;
    let embedder = model_embedder(&model, args.embeddings.as_deref())?;
    let queries = match (&args.text, &args.input) {
        (Some(t), _) => vec![Query {
            id: args.id.clone(),
            text: io::query_text(Some(t), None, None).unwrap_or_default(),
        }],
        (None, Some(p)) => read_queries(p)?,
        (None, None) => unreachable!("clap requires --text or --input"),
    };
    let mut out = io::output(args.output.as_deref())?;
    let mut failed = 0;
    for q in &queries {
        match predict(&model, embedder.as_ref(), q.id.as_deref(), &q.text, cfg.top_k) {
            Ok(mut prediction) => {
                if args.no_trace {
                    prediction.entries.iter_mut().for_each(|e| e.trace = None);
                }
                serde_json::to_writer(&mut out, &PredictionRecord { id: q.id.as_deref(), prediction })?;
            }
            Err(e @ Error::EmbeddingNotFound { .. }) => {
                failed += 1;
                log::warn!("query {}: {e}", q.id.as_deref().unwrap_or("?"));
                serde_json::to_writer(&mut out, &FailedQuery { id: q.id.as_deref(), error: e.to_string() })?;
            }
            Err(e) => return Err(e).context("predict"),
        }
        writeln!(out)?;
    }
    out.flush()?;
    if failed > 0 {
        return Err(Error::Data(format!("{failed} of {} queries had no precomputed embedding", queries.len())).into());
    }
    Ok(())
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    /// Trained model to score against --test.
    #[arg(long, requires = "test", conflicts_with = "data")]
    pub model: Option<PathBuf>,
    /// Labeled test file for --model.
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// Labeled dataset for end-to-end runs (split, train, and evaluate per seed).
    #[arg(long, required_unless_present = "model")]
    pub data: Option<PathBuf>,
    /// Number of end-to-end runs; run i uses seed + i.
    #[arg(long)]
    pub runs: Option<usize>,
    #[arg(short, long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub scoring: Option<ScoringStrategy>,
    /// Choose the scoring strategy on the validation split.
    #[arg(long)]
    pub select_scoring: bool,
    #[arg(long)]
    pub no_baselines: bool,
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Per-instance JSONL records (model mode).
    #[arg(long)]
    pub records: Option<PathBuf>,
    /// Machine-readable report.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

impl EvaluateArgs {
    pub fn apply(&self, cfg: &mut RunConfig) {
        if let Some(n) = self.runs {
            cfg.runs = n;
        }
        if let Some(s) = self.scoring {
            cfg.model.scoring = s;
        }
        if let Some(p) = self.embeddings.as_ref().filter(|_| self.data.is_some()) {
            cfg.model.embedder = EmbedderConfig::Precomputed {
                path: p.display().to_string(),
            };
        }
    }
}

#[derive(Serialize)]
struct InstanceRecord<'a> {
    id: &'a str,
    truth: &'a CategoryPath,
    predicted: &'a [CategoryPath],
}

#[derive(Serialize)]
struct ModelEvaluation<'a> {
    config: &'a RunConfig,
    model: String,
    test: String,
    report: EvalReport,
}

#[derive(Serialize)]
struct RunsEvaluation<'a> {
    config: &'a RunConfig,
    runs: Vec<ExperimentRun>,
    summary: Vec<(String, AggregateReport)>,
}

pub fn evaluate_cmd(cfg: &RunConfig, args: &EvaluateArgs) -> Result<()> {
    if let Some(model_path) = &args.model {
        let test_path = args.test.as_ref().expect("clap requires --test with --model");
        let model = load_model(model_path)?;
        let embedder = model_embedder(&model, args.embeddings.as_deref())?;
        let samples = labeled_samples(test_path)?;
        if samples.is_empty() {
            return Err(Error::Data(format!("{}: test set is empty", test_path.display())).into());
        }
        let (report, instances) = evaluate_model(&model, embedder.as_ref(), &samples, cfg.top_k).context("evaluate")?;
        if let Some(p) = &args.records {
            write_instances(p, &samples, &instances)?;
        }
        let rows = vec![(DUAL_METHOD.to_string(), aggregate_runs(std::slice::from_ref(&report))?)];
        println!("runs: 1, test samples: {}", report.instances);
        print!("{}", render_table(&rows));
        if let Some(p) = &args.json {
            io::write_json(
                p,
                &ModelEvaluation {
                    config: cfg,
                    model: model_path.display().to_string(),
                    test: test_path.display().to_string(),
                    report,
                },
            )?;
        }
        return Ok(());
    }

    let data = args.data.as_ref().expect("clap requires --data without --model");
    let ingested = ingest_path(data).with_context(|| format!("ingest {}", data.display()))?;
    let (samples, _) = prepare(&ingested.tickets, &cfg.preprocess, cfg.seed);
    let experiment = ExperimentConfig {
        model: cfg.model.clone(),
        split: cfg.split.clone(),
        k: cfg.top_k,
        baselines: !args.no_baselines,
        select_scoring: args.select_scoring,
    };
    let mut runs = Vec::with_capacity(cfg.runs);
    for i in 0..cfg.runs as u64 {
        let seed = cfg.seed + i;
        let run = run_experiment(&samples, &experiment, seed).with_context(|| format!("run with seed {seed}"))?;
        log::info!(
            "seed {seed}: train {} test {}, embedding {:.1} ms, centroids {:.1} ms",
            run.train,
            run.test,
            ms(run.embedding_time),
            ms(run.centroid_time)
        );
        runs.push(run);
    }
    let mut by_method: Vec<(String, Vec<EvalReport>)> = Vec::new();
    for run in &runs {
        for m in &run.methods {
            match by_method.iter_mut().find(|(name, _)| *name == m.method) {
                Some((_, v)) => v.push(m.report.clone()),
                None => by_method.push((m.method.clone(), vec![m.report.clone()])),
            }
        }
    }
    let summary = by_method
        .into_iter()
        .map(|(name, reports)| Ok((name, aggregate_runs(&reports)?)))
        .collect::<Result<Vec<_>>>()?;
    println!("runs: {}, samples: {}", cfg.runs, samples.len());
    print!("{}", render_table(&summary));
    if let Some(p) = &args.json {
        io::write_json(p, &RunsEvaluation { config: cfg, runs, summary })?;
    }
    Ok(())
}

fn write_instances(path: &Path, samples: &[CleanSample], instances: &[EvalInstance]) -> Result<()> {
    let mut w = io::create(path)?;
    for (s, i) in samples.iter().zip(instances) {
        serde_json::to_writer(
            &mut w,
            &InstanceRecord {
                id: &s.id,
                truth: &i.truth,
                predicted: &i.predicted,
            },
        )?;
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Args, Debug)]
pub struct UpdateArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// New labeled tickets.
    #[arg(long)]
    pub data: PathBuf,
    /// Write the updated model here instead of replacing --model.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
}

#[derive(Serialize)]
struct UpdateSummary {
    model: String,
    samples: usize,
    created: Vec<CategoryPath>,
    recomputed: Vec<CategoryPath>,
    embedding_ms: f64,
    update_ms: f64,
}

pub fn update(_cfg: &RunConfig, args: &UpdateArgs) -> Result<()> {
    let _lock = ModelLock::acquire(&args.model)?;
    let mut model = load_model(&args.model)?;
    let embedder = model_embedder(&model, args.embeddings.as_deref())?;
    let samples = labeled_samples(&args.data)?;
    let start = Instant::now();
    let encoded = encode_samples(model.tfidf(), embedder.as_ref(), &to_training(&samples)).context("encode")?;
    let embedding = start.elapsed();
    let start = Instant::now();
    let UpdateReport {
        samples: n,
        created,
        recomputed,
    } = model.incremental_update_encoded(&encoded).context("update")?;
    let update = start.elapsed();
    let target = args.output.as_ref().unwrap_or(&args.model);
    model.save(target).with_context(|| format!("saving model {}", target.display()))?;
    let summary = UpdateSummary {
        model: target.display().to_string(),
        samples: n,
        created,
        recomputed,
        embedding_ms: ms(embedding),
        update_ms: ms(update),
    };
    log::info!(
        "added {} samples, {} nodes recomputed in {:.3} ms (embedding {:.1} ms excluded)",
        summary.samples,
        summary.recomputed.len(),
        summary.update_ms,
        summary.embedding_ms
    );
    let mut stdout = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut stdout, &summary)?;
    writeln!(stdout)?;
    Ok(())
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// Labeled dataset; without it a synthetic corpus is generated.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Synthetic corpus size.
    #[arg(long, conflicts_with = "data")]
    pub samples: Option<usize>,
    #[arg(long)]
    pub base: Option<usize>,
    /// Comma-separated update batch sizes.
    #[arg(long, value_delimiter = ',')]
    pub batches: Option<Vec<usize>>,
    #[arg(long)]
    pub repetitions: Option<usize>,
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[arg(long)]
    pub json: Option<PathBuf>,
}

impl BenchArgs {
    pub fn apply(&self, cfg: &mut RunConfig) {
        if let Some(n) = self.samples {
            cfg.synth.samples = n;
        }
        if let Some(n) = self.base {
            cfg.bench.base = n;
        }
        if let Some(b) = &self.batches {
            cfg.bench.batch_sizes = b.clone();
        }
        if let Some(n) = self.repetitions {
            cfg.bench.repetitions = n;
        }
        if let Some(p) = &self.embeddings {
            cfg.model.embedder = EmbedderConfig::Precomputed {
                path: p.display().to_string(),
            };
        }
    }
}

#[derive(Serialize)]
struct BenchOutput<'a> {
    config: &'a RunConfig,
    samples: usize,
    embedding_ms: f64,
    report: &'a BenchReport,
}

pub fn bench(cfg: &RunConfig, args: &BenchArgs) -> Result<()> {
    let samples = match &args.data {
        Some(p) => {
            let ingested = ingest_path(p).with_context(|| format!("ingest {}", p.display()))?;
            prepare(&ingested.tickets, &cfg.preprocess, cfg.seed).0
        }
        None => generate_synthetic(&cfg.synth).context("synthetic corpus")?.samples,
    };
    let training = to_training(&samples);
    let base = cfg.bench.base.min(training.len());
    let start = Instant::now();
    let texts: Vec<&str> = training[..base].iter().map(|s| s.text.as_str()).collect();
    let tfidf = TfidfModel::fit(&texts, &cfg.model.tfidf).context("fit vectorizer")?;
    let embedder: Box<dyn SemanticEmbedder> = cfg.model.embedder.build()?;
    let encoded = encode_samples(&tfidf, embedder.as_ref(), &training).context("encode")?;
    let embedding = start.elapsed();
    let report = incremental_bench(&encoded, &tfidf, &embedder.descriptor(), &cfg.model, &cfg.bench).context("bench")?;
    println!("corpus: {} samples, embedding {:.1} ms (excluded)", samples.len(), ms(embedding));
    print!("{}", report.render());
    if let Some(p) = &args.json {
        io::write_json(
            p,
            &BenchOutput {
                config: cfg,
                samples: samples.len(),
                embedding_ms: ms(embedding),
                report: &report,
            },
        )?;
    }
    Ok(())
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Output directory for tickets.csv, manifest.json and config.json.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub categories: Option<usize>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub overlap: Option<f64>,
    #[arg(long)]
    pub imbalance: Option<f64>,
    /// Start from the 123-category, 8968-sample preset.
    #[arg(long)]
    pub full_scale: bool,
    /// Also write embeddings.tsv with the configured hash embedder.
    #[arg(long)]
    pub write_embeddings: bool,
}

impl SynthArgs {
    pub fn apply(&self, cfg: &mut RunConfig) {
        if self.full_scale {
            cfg.synth = SynthSpec {
                seed: cfg.seed,
                ..SynthSpec::full_scale()
            };
        }
        if let Some(n) = self.categories {
            cfg.synth.categories = n;
        }
        if let Some(n) = self.samples {
            cfg.synth.samples = n;
        }
        if let Some(v) = self.overlap {
            cfg.synth.overlap = v;
        }
        if let Some(v) = self.imbalance {
            cfg.synth.imbalance = v;
        }
    }
}

#[derive(Serialize)]
struct SynthSummary<'a> {
    samples: usize,
    categories: usize,
    nodes: usize,
    stale: usize,
    depth_histogram: &'a BTreeMap<usize, usize>,
    files: Vec<String>,
}

pub fn synth(cfg: &RunConfig, args: &SynthArgs) -> Result<()> {
    let corpus = generate_synthetic(&cfg.synth)?;
    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let tickets = args.out.join("tickets.csv");
    let mut w = io::create(&tickets)?;
    write_samples_csv(&mut w, &corpus.samples)?;
    w.flush()?;
    let manifest_path = args.out.join("manifest.json");
    io::write_json(&manifest_path, &corpus.manifest)?;
    let config_path = args.out.join("config.json");
    io::write_json(&config_path, cfg)?;
    let mut files = vec![tickets, manifest_path, config_path];
    if args.write_embeddings {
        let EmbedderConfig::Hash { .. } = cfg.model.embedder else {
            return Err(UsageError("--write-embeddings needs a hash embedder in the model config".into()).into());
        };
        let embedder = cfg.model.embedder.build()?;
        let records = corpus
            .samples
            .iter()
            .map(|s| Ok((s.id.clone(), embedder.embed(Some(&s.id), &s.text)?.values().to_vec())))
            .collect::<Result<Vec<_>>>()?;
        let path = args.out.join("embeddings.tsv");
        let mut w = io::create(&path)?;
        centroid_htc::representation::embed::write_sidecar_text(&mut w, &records)?;
        w.flush()?;
        files.push(path);
    }
    let SynthManifest {
        category_count,
        node_count,
        stale_count,
        depth_histogram,
        ..
    } = &corpus.manifest;
    let summary = SynthSummary {
        samples: corpus.samples.len(),
        categories: *category_count,
        nodes: *node_count,
        stale: *stale_count,
        depth_histogram,
        files: files.iter().map(|p| p.display().to_string()).collect(),
    };
    let mut stdout = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut stdout, &summary)?;
    writeln!(stdout)?;
    Ok(())
}
