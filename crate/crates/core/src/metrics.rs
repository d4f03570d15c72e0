//! Hierarchy-aware evaluation. Every metric compares ancestor-augmented
//! label sets; the implicit root is never part of a set.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::RankedPrediction;
use crate::taxonomy::CategoryPath;

/// A truth label with its ranked predicted paths, best first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalInstance {
    pub truth: CategoryPath,
    pub predicted: Vec<CategoryPath>,
}

impl EvalInstance {
    pub fn new(truth: CategoryPath, predicted: Vec<CategoryPath>) -> Self {
        Self { truth, predicted }
    }

    pub fn from_prediction(truth: CategoryPath, prediction: &RankedPrediction) -> Self {
        Self::new(truth, prediction.paths().cloned().collect())
    }

    pub fn top(&self) -> Option<&CategoryPath> {
        self.predicted.first()
    }
}

/// Size of the shared ancestor set. Ancestor sets are prefix chains, so the
/// overlap is the length of the common segment prefix.
pub fn shared_ancestors(a: &CategoryPath, b: &CategoryPath) -> usize {
    a.segments()
        .iter()
        .zip(b.segments())
        .take_while(|(x, y)| x == y)
        .count()
}

/// F1 between one prediction's ancestor set and the truth's.
pub fn instance_hf1(truth: &CategoryPath, predicted: &CategoryPath) -> f64 {
    let inter = shared_ancestors(truth, predicted);
    if inter == 0 {
        return 0.0;
    }
    2.0 * inter as f64 / (truth.depth() + predicted.depth()) as f64
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct HierarchicalScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Micro-averaged hierarchical precision, recall, and F1 over (truth, top-1) pairs.
pub fn hierarchical_f1<'a>(pairs: impl IntoIterator<Item = (&'a CategoryPath, &'a CategoryPath)>) -> HierarchicalScores {
    let (mut inter, mut pred, mut truth) = (0u64, 0u64, 0u64);
    for (t, p) in pairs {
        inter += shared_ancestors(t, p) as u64;
        pred += p.depth() as u64;
        truth += t.depth() as u64;
    }
    if pred == 0 || truth == 0 {
        return HierarchicalScores::default();
    }
    let precision = inter as f64 / pred as f64;
    let recall = inter as f64 / truth as f64;
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    HierarchicalScores { precision, recall, f1 }
}

fn mean(values: impl Iterator<Item = f64>, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        values.sum::<f64>() / n as f64
    }
}

pub fn top_k_accuracy(instances: &[EvalInstance], k: usize) -> f64 {
    let hits = instances
        .iter()
        .filter(|i| i.predicted.iter().take(k).any(|p| *p == i.truth))
        .count();
    mean(std::iter::once(hits as f64), instances.len())
}

/// Mean over instances of the best instance-level hF1 among the top `k`.
pub fn hierarchical_top_k(instances: &[EvalInstance], k: usize) -> f64 {
    let credit = instances.iter().map(|i| {
        i.predicted
            .iter()
            .take(k)
            .map(|p| instance_hf1(&i.truth, p))
            .fold(0.0, f64::max)
    });
    mean(credit, instances.len())
}

/// Binary variant: full credit when any of the top `k` shares an ancestor.
pub fn hierarchical_top_k_any(instances: &[EvalInstance], k: usize) -> f64 {
    let hits = instances
        .iter()
        .filter(|i| i.predicted.iter().take(k).any(|p| shared_ancestors(&i.truth, p) > 0))
        .count();
    mean(std::iter::once(hits as f64), instances.len())
}

pub fn exact_match(instances: &[EvalInstance]) -> f64 {
    let hits = instances.iter().filter(|i| i.top() == Some(&i.truth)).count();
    mean(std::iter::once(hits as f64), instances.len())
}

/// One run's metrics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub k: usize,
    pub instances: usize,
    pub h_precision: f64,
    pub h_recall: f64,
    pub h_f1: f64,
    pub top_k_accuracy: f64,
    pub h_top_k_accuracy: f64,
    pub exact_match: f64,
}

pub fn evaluate(instances: &[EvalInstance], k: usize) -> Result<EvalReport> {
    if instances.is_empty() {
        return Err(Error::Data("no instances to evaluate".into()));
    }
    if k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    if let Some(i) = instances.iter().position(|i| i.predicted.is_empty()) {
        return Err(Error::Data(format!("instance {i} has no predictions")));
    }
    let h = hierarchical_f1(instances.iter().map(|i| (&i.truth, &i.predicted[0])));
    Ok(EvalReport {
        k,
        instances: instances.len(),
        h_precision: h.precision,
        h_recall: h.recall,
        h_f1: h.f1,
        top_k_accuracy: top_k_accuracy(instances, k),
        h_top_k_accuracy: hierarchical_top_k(instances, k),
        exact_match: exact_match(instances),
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// Sample standard deviation (n - 1 denominator); 0 for a single value.
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self::default();
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, std }
    }
}

impl std::fmt::Display for MeanStd {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:.3} ± {:.3}", self.mean, self.std)
    }
}

/// Several runs of the same method.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub k: usize,
    pub runs: Vec<EvalReport>,
    pub h_f1: MeanStd,
    pub top_k_accuracy: MeanStd,
    pub h_top_k_accuracy: MeanStd,
    pub exact_match: MeanStd,
}

pub fn aggregate_runs(reports: &[EvalReport]) -> Result<AggregateReport> {
    let first = reports.first().ok_or_else(|| Error::Data("no runs to aggregate".into()))?;
    let col = |f: fn(&EvalReport) -> f64| MeanStd::of(&reports.iter().map(f).collect::<Vec<_>>());
    Ok(AggregateReport {
        k: first.k,
        runs: reports.to_vec(),
        h_f1: col(|r| r.h_f1),
        top_k_accuracy: col(|r| r.top_k_accuracy),
        h_top_k_accuracy: col(|r| r.h_top_k_accuracy),
        exact_match: col(|r| r.exact_match),
    })
}

/// Aligned text table, one row per method.
pub fn render_table(rows: &[(String, AggregateReport)]) -> String {
    let k = rows.first().map_or(3, |r| r.1.k);
    let header = [
        "Method".to_string(),
        "H-F1".to_string(),
        format!("Top-{k}"),
        format!("H-Top-{k}"),
        "Exact".to_string(),
    ];
    let body: Vec<[String; 5]> = rows
        .iter()
        .map(|(name, r)| {
            [
                name.clone(),
                r.h_f1.to_string(),
                r.top_k_accuracy.to_string(),
                r.h_top_k_accuracy.to_string(),
                r.exact_match.to_string(),
            ]
        })
        .collect();
    let mut widths = header.iter().map(|h| h.chars().count()).collect::<Vec<_>>();
    for row in &body {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: &[String; 5]| {
        let mut s = String::new();
        for (i, (cell, w)) in cells.iter().zip(&widths).enumerate() {
            if i > 0 {
                s.push_str("  ");
            }
            let pad = w - cell.chars().count();
            if i == 0 {
                s.push_str(cell);
                s.push_str(&" ".repeat(pad));
            } else {
                s.push_str(&" ".repeat(pad));
                s.push_str(cell);
            }
        }
        s.trim_end().to_string()
    };
    let mut out = line(&header);
    out.push('\n');
    out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)));
    out.push('\n');
    for row in &body {
        out.push_str(&line(row));
        out.push('\n');
    }
    out
}
