//! Lexical (TF-IDF) and semantic (dense) document views.

pub mod embed;
pub mod tfidf;
pub mod tokenize;
pub mod vector;

use rayon::prelude::*;

pub use embed::{EmbedderDescriptor, HashEmbedder, PrecomputedEmbedder, SemanticEmbedder};
pub use tfidf::{TfidfConfig, TfidfModel};
pub use tokenize::tokenize;
pub use vector::{cosine, DenseVector, DualVector, SparseVector, View, ViewVector};

use crate::error::Result;

/// Encodes one document into both views.
pub fn encode(tfidf: &TfidfModel, embedder: &dyn SemanticEmbedder, id: Option<&str>, text: &str) -> Result<DualVector> {
    Ok(DualVector {
        lexical: tfidf.transform(text),
        semantic: embedder.embed(id, text)?,
    })
}

/// Parallel batch encoding; output order matches input order.
pub fn encode_batch<'a, I>(tfidf: &TfidfModel, embedder: &dyn SemanticEmbedder, docs: I) -> Result<Vec<DualVector>>
where
    I: IntoParallelIterator<Item = (Option<&'a str>, &'a str)>,
{
    docs.into_par_iter()
        .map(|(id, text)| encode(tfidf, embedder, id, text))
        .collect()
}
