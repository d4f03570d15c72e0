use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sparse vector with strictly increasing indices and nonzero weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    dimension: usize,
    entries: Vec<(u32, f64)>,
}

impl SparseVector {
    pub fn zeros(dimension: usize) -> Self {
        Self {
            dimension,
            entries: Vec::new(),
        }
    }

    /// Builds from arbitrary `(index, weight)` pairs: duplicate indices are
    /// summed and zeros dropped.
    pub fn from_pairs(dimension: usize, mut pairs: Vec<(u32, f64)>) -> Result<Self> {
        pairs.sort_by_key(|&(i, _)| i);
        let mut entries: Vec<(u32, f64)> = Vec::with_capacity(pairs.len());
        for (i, w) in pairs {
            if i as usize >= dimension {
                return Err(Error::DimensionMismatch {
                    expected: dimension,
                    found: i as usize + 1,
                });
            }
            match entries.last_mut() {
                Some((j, acc)) if *j == i => *acc += w,
                _ => entries.push((i, w)),
            }
        }
        entries.retain(|&(_, w)| w != 0.0);
        Ok(Self { dimension, entries })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|(_, w)| w * w).sum::<f64>().sqrt()
    }

    /// Scales to unit L2 norm; the zero vector stays zero.
    pub fn normalize(&mut self) {
        let n = self.norm();
        if n > 0.0 {
            for (_, w) in &mut self.entries {
                *w /= n;
            }
        }
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        let mut out = self.clone();
        for (_, w) in &mut out.entries {
            *w *= alpha;
        }
        out.entries.retain(|&(_, w)| w != 0.0);
        out
    }

    pub fn dot(&self, other: &SparseVector) -> f64 {
        let (mut i, mut j, mut acc) = (0, 0, 0.0);
        let (a, b) = (&self.entries, &other.entries);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    acc += a[i].1 * b[j].1;
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    }

    pub fn dot_dense(&self, dense: &[f64]) -> f64 {
        self.entries
            .iter()
            .map(|&(i, w)| w * dense[i as usize])
            .sum()
    }

    /// `acc += alpha * self`
    pub fn add_to(&self, acc: &mut [f64], alpha: f64) {
        for &(i, w) in &self.entries {
            acc[i as usize] += alpha * w;
        }
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dimension];
        self.add_to(&mut out, 1.0);
        out
    }
}

/// Fixed-length dense vector of finite values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseVector {
    values: Vec<f64>,
}

impl DenseVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Data("dense vector must have positive dimension".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("dense vector contains non-finite values".into()));
        }
        Ok(Self { values })
    }

    pub fn zeros(dimension: usize) -> Self {
        Self {
            values: vec![0.0; dimension],
        }
    }

    pub fn dimension(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn norm(&self) -> f64 {
        norm(&self.values)
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| v * alpha).collect(),
        }
    }
}

/// A document in both views. The views are never concatenated by the
/// centroid classifier.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualVector {
    pub lexical: SparseVector,
    pub semantic: DenseVector,
}

/// The two embedding views.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum View {
    Lexical,
    Semantic,
}

impl View {
    pub const ALL: [View; 2] = [View::Lexical, View::Semantic];
}

impl std::fmt::Display for View {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            View::Lexical => "lexical",
            View::Semantic => "semantic",
        })
    }
}

/// Borrowed view of one document representation, for code shared by both views.
#[derive(Clone, Copy, Debug)]
pub enum ViewVector<'a> {
    Sparse(&'a SparseVector),
    Dense(&'a [f64]),
}

impl<'a> ViewVector<'a> {
    pub fn of(doc: &'a DualVector, view: View) -> Self {
        match view {
            View::Lexical => ViewVector::Sparse(&doc.lexical),
            View::Semantic => ViewVector::Dense(doc.semantic.values()),
        }
    }

    pub fn dimension(&self) -> usize {
        match self {
            ViewVector::Sparse(s) => s.dimension(),
            ViewVector::Dense(d) => d.len(),
        }
    }

    pub fn norm(&self) -> f64 {
        match self {
            ViewVector::Sparse(s) => s.norm(),
            ViewVector::Dense(d) => norm(d),
        }
    }

    pub fn dot_dense(&self, dense: &[f64]) -> f64 {
        match self {
            ViewVector::Sparse(s) => s.dot_dense(dense),
            ViewVector::Dense(d) => dot(d, dense),
        }
    }

    pub fn dot(&self, other: &ViewVector<'_>) -> f64 {
        match (self, other) {
            (ViewVector::Sparse(a), ViewVector::Sparse(b)) => a.dot(b),
            (ViewVector::Sparse(a), ViewVector::Dense(b)) => a.dot_dense(b),
            (ViewVector::Dense(a), ViewVector::Sparse(b)) => b.dot_dense(a),
            (ViewVector::Dense(a), ViewVector::Dense(b)) => dot(a, b),
        }
    }

    /// `acc += self`
    pub fn add_to(&self, acc: &mut [f64]) {
        match self {
            ViewVector::Sparse(s) => s.add_to(acc, 1.0),
            ViewVector::Dense(d) => {
                for (a, v) in acc.iter_mut().zip(d.iter()) {
                    *a += v;
                }
            }
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Cosine similarity from a dot product and two norms; 0 when either norm is 0.
pub fn cosine_from_parts(dot: f64, norm_a: f64, norm_b: f64) -> f64 {
    if norm_a == 0.0 || norm_b == 0.0 {
        return 0.0;
    }
    (dot / (norm_a * norm_b)).clamp(-1.0, 1.0)
}

/// Cosine similarity of two dense slices. A zero vector yields 0.
pub fn cosine_dense(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    Ok(cosine_from_parts(dot(a, b), norm(a), norm(b)))
}

pub fn cosine_sparse(a: &SparseVector, b: &SparseVector) -> Result<f64> {
    if a.dimension() != b.dimension() {
        return Err(Error::DimensionMismatch {
            expected: a.dimension(),
            found: b.dimension(),
        });
    }
    Ok(cosine_from_parts(a.dot(b), a.norm(), b.norm()))
}

/// Cosine between any two vectors of the same view.
pub fn cosine(a: ViewVector<'_>, b: ViewVector<'_>) -> Result<f64> {
    if a.dimension() != b.dimension() {
        return Err(Error::DimensionMismatch {
            expected: a.dimension(),
            found: b.dimension(),
        });
    }
    Ok(cosine_from_parts(a.dot(&b), a.norm(), b.norm()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn cosine_basics() {
        assert_eq!(cosine_dense(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert_eq!(cosine_dense(&[0.0, 0.0], &[3.0, 1.0]).unwrap(), 0.0);
        let v = [0.3, -2.0, 5.0];
        assert!((cosine_dense(&v, &v).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(
            cosine_dense(&[1.0], &[1.0, 2.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn sparse_from_pairs_merges_and_drops_zero() {
        let v = SparseVector::from_pairs(5, vec![(3, 1.0), (1, 2.0), (3, 1.0), (4, 0.0)]).unwrap();
        assert_eq!(v.entries(), &[(1, 2.0), (3, 2.0)]);
        assert!(SparseVector::from_pairs(2, vec![(2, 1.0)]).is_err());
    }

    #[test]
    fn sparse_dense_agree() {
        let a = SparseVector::from_pairs(6, vec![(0, 1.0), (2, -3.0), (5, 0.5)]).unwrap();
        let b = SparseVector::from_pairs(6, vec![(2, 2.0), (4, 1.0), (5, 4.0)]).unwrap();
        let ca = cosine_sparse(&a, &b).unwrap();
        let cb = cosine_dense(&a.to_dense(), &b.to_dense()).unwrap();
        assert!((ca - cb).abs() < 1e-15);
        let mixed = cosine(ViewVector::Sparse(&a), ViewVector::Dense(&b.to_dense())).unwrap();
        assert!((mixed - cb).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn cosine_symmetric_and_scale_invariant(
            a in prop::collection::vec(-10.0f64..10.0, 8),
            b in prop::collection::vec(-10.0f64..10.0, 8),
            alpha in 0.01f64..100.0,
        ) {
            let ab = cosine_dense(&a, &b).unwrap();
            let ba = cosine_dense(&b, &a).unwrap();
            prop_assert!((ab - ba).abs() <= 1e-12);
            let scaled: Vec<f64> = a.iter().map(|x| x * alpha).collect();
            let sb = cosine_dense(&scaled, &b).unwrap();
            prop_assert!((ab - sb).abs() <= 1e-12);
            prop_assert!((-1.0..=1.0).contains(&ab));
        }
    }
}
