//! Self-contained TF-IDF vectorizer over word uni- and bi-grams.
//!
//! Weights are raw term counts times the smoothed inverse document frequency
//! `ln((1 + N) / (1 + df)) + 1`, then L2-normalized per document.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::tokenize::{ngrams, tokenize_with};
use super::vector::SparseVector;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TfidfConfig {
    pub max_features: usize,
    /// Minimum document count.
    pub min_df: usize,
    /// Maximum document proportion. Below 1.0 the cut-off is `floor(max_df * N)`.
    pub max_df: f64,
    pub ngram_range: (usize, usize),
    pub min_token_len: usize,
}

impl Default for TfidfConfig {
    fn default() -> Self {
        Self {
            max_features: 10_000,
            min_df: 2,
            max_df: 0.95,
            ngram_range: (1, 2),
            min_token_len: 2,
        }
    }
}

impl TfidfConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_features == 0 {
            return Err(Error::Config("tfidf.max_features must be positive".into()));
        }
        if !(self.max_df > 0.0 && self.max_df <= 1.0) {
            return Err(Error::Config("tfidf.max_df must be in (0, 1]".into()));
        }
        let (lo, hi) = self.ngram_range;
        if lo == 0 || hi < lo {
            return Err(Error::Config("tfidf.ngram_range must satisfy 1 <= min <= max".into()));
        }
        if self.min_token_len == 0 {
            return Err(Error::Config("tfidf.min_token_len must be positive".into()));
        }
        Ok(())
    }

    fn max_doc_count(&self, n_docs: usize) -> usize {
        if self.max_df >= 1.0 {
            n_docs
        } else {
            (self.max_df * n_docs as f64).floor() as usize
        }
    }

    /// Terms (n-grams) of a text under this config.
    pub fn terms(&self, text: &str) -> Vec<String> {
        let tokens = tokenize_with(text, self.min_token_len);
        ngrams(&tokens, self.ngram_range.0, self.ngram_range.1)
    }
}

/// A fitted vectorizer. Vocabulary indices are assigned in lexicographic term order.
#[derive(Clone, Debug, PartialEq)]
pub struct TfidfModel {
    config: TfidfConfig,
    n_docs: usize,
    terms: Vec<String>,
    idf: Vec<f64>,
    doc_freq: Vec<u64>,
    index: HashMap<String, u32>,
}

impl TfidfModel {
    pub fn fit<S: AsRef<str>>(corpus: &[S], config: &TfidfConfig) -> Result<Self> {
        config.validate()?;
        if corpus.is_empty() {
            return Err(Error::Config("cannot fit TF-IDF on an empty corpus".into()));
        }
        let n = corpus.len();
        // term -> (document frequency, total count)
        let mut stats: HashMap<String, (u64, u64)> = HashMap::new();
        for doc in corpus {
            let terms = config.terms(doc.as_ref());
            let mut seen: HashSet<&str> = HashSet::with_capacity(terms.len());
            for t in &terms {
                let first = seen.insert(t.as_str());
                let e = stats.entry(t.clone()).or_insert((0, 0));
                e.1 += 1;
                if first {
                    e.0 += 1;
                }
            }
        }
        let lo = config.min_df as u64;
        let hi = config.max_doc_count(n) as u64;
        let mut candidates: Vec<(String, u64, f64)> = stats
            .into_iter()
            .filter(|(_, (df, _))| *df >= lo && *df <= hi)
            .map(|(t, (df, total))| {
                let idf = smoothed_idf(n, df);
                (t, df, total as f64 * idf)
            })
            .collect();
        if candidates.is_empty() {
            return Err(Error::EmptyVocabulary);
        }
        if candidates.len() > config.max_features {
            candidates.sort_by(|a, b| b.2.total_cmp(&a.2).then_with(|| a.0.cmp(&b.0)));
            candidates.truncate(config.max_features);
        }
        candidates.sort_by(|a, b| a.0.cmp(&b.0));

        let mut terms = Vec::with_capacity(candidates.len());
        let mut idf = Vec::with_capacity(candidates.len());
        let mut doc_freq = Vec::with_capacity(candidates.len());
        for (t, df, _) in candidates {
            idf.push(smoothed_idf(n, df));
            doc_freq.push(df);
            terms.push(t);
        }
        Ok(Self::from_parts(config.clone(), n, terms, idf, doc_freq))
    }

    pub(crate) fn from_parts(
        config: TfidfConfig,
        n_docs: usize,
        terms: Vec<String>,
        idf: Vec<f64>,
        doc_freq: Vec<u64>,
    ) -> Self {
        let index = terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Self {
            config,
            n_docs,
            terms,
            idf,
            doc_freq,
            index,
        }
    }

    /// Unit-norm TF-IDF vector; all-out-of-vocabulary text maps to the zero vector.
    pub fn transform(&self, text: &str) -> SparseVector {
        let mut pairs: Vec<(u32, f64)> = self
            .config
            .terms(text)
            .into_iter()
            .filter_map(|t| self.index.get(&t).map(|&i| (i, 1.0)))
            .collect();
        pairs.sort_by_key(|&(i, _)| i);
        let mut merged: Vec<(u32, f64)> = Vec::with_capacity(pairs.len());
        for (i, c) in pairs {
            match merged.last_mut() {
                Some((j, acc)) if *j == i => *acc += c,
                _ => merged.push((i, c)),
            }
        }
        for (i, w) in &mut merged {
            *w *= self.idf[*i as usize];
        }
        let mut v = SparseVector::from_pairs(self.dimension(), merged)
            .expect("vocabulary indices are within dimension");
        v.normalize();
        v
    }

    pub fn dimension(&self) -> usize {
        self.terms.len()
    }

    pub fn config(&self) -> &TfidfConfig {
        &self.config
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn idf(&self) -> &[f64] {
        &self.idf
    }

    pub fn doc_freq(&self) -> &[u64] {
        &self.doc_freq
    }

    pub fn index_of(&self, term: &str) -> Option<u32> {
        self.index.get(term).copied()
    }

    pub fn idf_of(&self, term: &str) -> Option<f64> {
        self.index_of(term).map(|i| self.idf[i as usize])
    }
}

pub fn smoothed_idf(n_docs: usize, df: u64) -> f64 {
    ((1.0 + n_docs as f64) / (1.0 + df as f64)).ln() + 1.0
}
