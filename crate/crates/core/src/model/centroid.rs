use crate::representation::vector::{norm, ViewVector};

/// One prototype vector: raw mean plus its unit-norm copy.
#[derive(Clone, Debug, PartialEq)]
pub struct Centroid {
    mean: Vec<f64>,
    unit: Vec<f64>,
    members: u64,
    unit_norm: f64,
}

impl Centroid {
    pub fn from_sum(sum: &[f64], members: u64) -> Self {
        let inv = if members > 0 { 1.0 / members as f64 } else { 0.0 };
        let mean: Vec<f64> = sum.iter().map(|s| s * inv).collect();
        Self::from_mean(mean, members)
    }

    pub(crate) fn from_mean(mean: Vec<f64>, members: u64) -> Self {
        let n = norm(&mean);
        let unit: Vec<f64> = if n > 0.0 {
            mean.iter().map(|m| m / n).collect()
        } else {
            vec![0.0; mean.len()]
        };
        Self::from_parts(mean, unit, members)
    }

    pub(crate) fn from_parts(mean: Vec<f64>, unit: Vec<f64>, members: u64) -> Self {
        let unit_norm = norm(&unit);
        Self {
            mean,
            unit,
            members,
            unit_norm,
        }
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn unit(&self) -> &[f64] {
        &self.unit
    }

    pub fn members(&self) -> u64 {
        self.members
    }

    /// True when all member vectors summed to zero.
    pub fn is_degenerate(&self) -> bool {
        self.unit_norm == 0.0
    }

    /// Cosine with a query whose norm is already known.
    pub fn cosine_with(&self, query: &ViewVector<'_>, query_norm: f64) -> f64 {
        if query_norm == 0.0 || self.unit_norm == 0.0 {
            return 0.0;
        }
        (query.dot_dense(&self.unit) / (query_norm * self.unit_norm)).clamp(-1.0, 1.0)
    }
}

/// The centroids of one node in one view, along with the running pool sum
/// that makes single-centroid updates incremental.
#[derive(Clone, Debug, PartialEq)]
pub struct CentroidSet {
    pool_sum: Vec<f64>,
    pool_count: u64,
    centroids: Vec<Centroid>,
}

impl CentroidSet {
    pub fn empty(dimension: usize) -> Self {
        Self {
            pool_sum: vec![0.0; dimension],
            pool_count: 0,
            centroids: Vec::new(),
        }
    }

    pub(crate) fn from_parts(pool_sum: Vec<f64>, pool_count: u64, centroids: Vec<Centroid>) -> Self {
        Self {
            pool_sum,
            pool_count,
            centroids,
        }
    }

    pub fn dimension(&self) -> usize {
        self.pool_sum.len()
    }

    pub fn pool_sum(&self) -> &[f64] {
        &self.pool_sum
    }

    pub fn pool_count(&self) -> u64 {
        self.pool_count
    }

    pub fn centroids(&self) -> &[Centroid] {
        &self.centroids
    }

    pub fn is_clustered(&self) -> bool {
        self.centroids.len() > 1
    }

    pub(crate) fn reset_pool(&mut self) {
        self.pool_sum.iter_mut().for_each(|v| *v = 0.0);
        self.pool_count = 0;
    }

    pub(crate) fn add(&mut self, v: &ViewVector<'_>) {
        v.add_to(&mut self.pool_sum);
        self.pool_count += 1;
    }

    /// Single mean centroid from the current pool.
    pub(crate) fn refresh_mean(&mut self) {
        self.centroids = vec![Centroid::from_sum(&self.pool_sum, self.pool_count)];
    }

    pub(crate) fn set_centroids(&mut self, centroids: Vec<Centroid>) {
        self.centroids = centroids;
    }

    /// Max cosine over this node's centroids; 0 for a zero query.
    pub fn max_similarity(&self, query: &ViewVector<'_>, query_norm: f64) -> f64 {
        self.centroids
            .iter()
            .map(|c| c.cosine_with(query, query_norm))
            .reduce(f64::max)
            .unwrap_or(0.0)
    }
}

/// Both views' centroid sets for one node.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeCentroids {
    pub lexical: CentroidSet,
    pub semantic: CentroidSet,
}

impl NodeCentroids {
    pub fn empty(lexical_dim: usize, semantic_dim: usize) -> Self {
        Self {
            lexical: CentroidSet::empty(lexical_dim),
            semantic: CentroidSet::empty(semantic_dim),
        }
    }

    pub fn view(&self, view: crate::representation::View) -> &CentroidSet {
        match view {
            crate::representation::View::Lexical => &self.lexical,
            crate::representation::View::Semantic => &self.semantic,
        }
    }

    pub(crate) fn view_mut(&mut self, view: crate::representation::View) -> &mut CentroidSet {
        match view {
            crate::representation::View::Lexical => &mut self.lexical,
            crate::representation::View::Semantic => &mut self.semantic,
        }
    }

    pub fn is_clustered(&self) -> bool {
        self.lexical.is_clustered() || self.semantic.is_clustered()
    }
}
