use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use centroid_htc::model::EmbedderConfig;
use centroid_htc::pipeline::{html_to_text, InputFormat};
use centroid_htc::pipeline::clean::join_text;
use centroid_htc::representation::{EmbedderDescriptor, HashEmbedder, PrecomputedEmbedder, SemanticEmbedder};
use centroid_htc::{Error, TrainedModel};

use crate::UsageError;

/// An unlabeled query read from a file or the command line.
#[derive(Clone, Debug, PartialEq)]
pub struct Query {
    pub id: Option<String>,
    pub text: String,
}

#[derive(Deserialize)]
struct QueryLine {
    id: Option<serde_json::Value>,
    text: Option<String>,
    title: Option<String>,
    description: Option<String>,
}

pub fn query_text(text: Option<&str>, title: Option<&str>, description: Option<&str>) -> Option<String> {
    match (text, title, description) {
        (Some(t), _, _) if !t.trim().is_empty() => Some(html_to_text(t)),
        (_, Some(t), Some(d)) => Some(join_text(&html_to_text(t), &html_to_text(d))),
        (_, Some(t), None) => Some(html_to_text(t)),
        (_, None, Some(d)) => Some(html_to_text(d)),
        _ => None,
    }
}

/// Reads queries from JSONL or a delimited file with a header, detected the
/// same way as ticket files. Each record carries `text`, or `title` and `description`, and an
/// optional `id`.
pub fn read_queries(path: &Path) -> Result<Vec<Query>> {
    let bytes = std::fs::read(path).with_context(|| format!("reading queries {}", path.display()))?;
    let first = bytes.split(|b| *b == b'\n').next().unwrap_or_default();
    let format = InputFormat::detect(path, &String::from_utf8_lossy(first))?;
    if format == InputFormat::JsonLines {
        let mut out = Vec::new();
        for (n, line) in bytes.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let q: QueryLine = serde_json::from_str(&line)
                .map_err(|e| Error::Data(format!("{} line {}: {e}", path.display(), n + 1)))?;
            let id = q.id.map(|v| match v {
                serde_json::Value::String(s) => s,
                other => other.to_string(),
            });
            let text = query_text(q.text.as_deref(), q.title.as_deref(), q.description.as_deref())
                .ok_or_else(|| Error::Data(format!("{} line {}: no text, title or description", path.display(), n + 1)))?;
            out.push(Query { id, text });
        }
        return Ok(out);
    }
    let InputFormat::Delimited(delimiter) = format else {
        unreachable!("json lines handled above")
    };
    let mut reader = csv::ReaderBuilder::new().delimiter(delimiter).from_reader(bytes.as_slice());
    let headers = reader.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h.trim() == name);
    let (id, text, title, description) = (col("id"), col("text"), col("title"), col("description"));
    if text.is_none() && title.is_none() && description.is_none() {
        return Err(Error::Data(format!("{}: header needs a text, title or description column", path.display())).into());
    }
    let mut out = Vec::new();
    for (n, record) in reader.records().enumerate() {
        let record = record?;
        let field = |i: Option<usize>| i.and_then(|i| record.get(i));
        let text = query_text(field(text), field(title), field(description))
            .ok_or_else(|| Error::Data(format!("{} record {}: empty query", path.display(), n + 1)))?;
        out.push(Query {
            id: field(id).map(str::to_string),
            text,
        });
    }
    Ok(out)
}

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// Stdout, or a file when a path is given.
pub fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

/// Advisory `<model>.lock` file held for the duration of an update.
#[derive(Debug)]
pub struct ModelLock {
    path: PathBuf,
}

impl ModelLock {
    pub fn acquire(model: &Path) -> Result<Self> {
        let mut name = model.as_os_str().to_owned();
        name.push(".lock");
        let path = PathBuf::from(name);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                writeln!(f, "{}", std::process::id())?;
                Ok(Self { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(UsageError(format!(
                "{} is locked by another update (remove {} if no update is running)",
                model.display(),
                path.display()
            ))
            .into()),
            Err(e) => Err(e).with_context(|| format!("creating lock {}", path.display())),
        }
    }
}

impl Drop for ModelLock {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.path);
    }
}

/// The embedder for querying or updating a trained model. Hash models
/// rebuild theirs from the stored descriptor; precomputed models need a
/// sidecar covering the new documents.
pub fn model_embedder(model: &TrainedModel, sidecar: Option<&Path>) -> Result<Box<dyn SemanticEmbedder>> {
    if let Some(path) = sidecar {
        let e = PrecomputedEmbedder::load(path).with_context(|| format!("loading embeddings {}", path.display()))?;
        if e.dimension() != model.semantic_dimension() {
            return Err(Error::DimensionMismatch {
                expected: model.semantic_dimension(),
                found: e.dimension(),
            }
            .into());
        }
        return Ok(Box::new(e));
    }
    match model.embedder_descriptor() {
        EmbedderDescriptor::Hash { dimension, seed } => Ok(Box::new(HashEmbedder::new(*dimension, *seed)?)),
        EmbedderDescriptor::Precomputed { .. } => match &model.config().embedder {
            EmbedderConfig::Precomputed { path } if Path::new(path).exists() => {
                Ok(Box::new(PrecomputedEmbedder::load(Path::new(path))?))
            }
            _ => Err(UsageError("model was trained on precomputed embeddings; pass --embeddings".into()).into()),
        },
    }
}
