//! Multi-centroid splitting of high-variance nodes: average-linkage
//! agglomerative clustering under cosine distance, with the cluster count
//! chosen by mean silhouette.

use kodama::{linkage, Method};

use crate::representation::vector::{cosine_from_parts, ViewVector};

/// Upper-triangle pairwise distance matrix in the layout `kodama` expects.
#[derive(Clone, Debug)]
pub struct CondensedDistances {
    n: usize,
    data: Vec<f64>,
}

impl CondensedDistances {
    pub fn cosine(vectors: &[ViewVector<'_>]) -> Self {
        let n = vectors.len();
        let norms: Vec<f64> = vectors.iter().map(|v| v.norm()).collect();
        let mut data = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            for j in (i + 1)..n {
                let c = cosine_from_parts(vectors[i].dot(&vectors[j]), norms[i], norms[j]);
                data.push((1.0 - c).max(0.0));
            }
        }
        Self { n, data }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return 0.0;
        }
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        // offset of row a in the condensed layout
        let row = a * self.n - a * (a + 1) / 2;
        self.data[row + (b - a - 1)]
    }
}

/// Mean silhouette over all points. Points in singleton clusters score 0.
pub fn silhouette_score(dist: &CondensedDistances, labels: &[usize]) -> f64 {
    let n = labels.len();
    let k = labels.iter().copied().max().map_or(0, |m| m + 1);
    if n == 0 || k < 2 {
        return 0.0;
    }
    let mut sizes = vec![0usize; k];
    for &l in labels {
        sizes[l] += 1;
    }
    let mut total = 0.0;
    let mut sums = vec![0.0; k];
    for i in 0..n {
        sums.iter_mut().for_each(|s| *s = 0.0);
        for j in 0..n {
            if i != j {
                sums[labels[j]] += dist.get(i, j);
            }
        }
        let own = labels[i];
        if sizes[own] <= 1 {
            continue;
        }
        let a = sums[own] / (sizes[own] - 1) as f64;
        let b = (0..k)
            .filter(|&c| c != own && sizes[c] > 0)
            .map(|c| sums[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let denom = a.max(b);
        if denom > 0.0 {
            total += (b - a) / denom;
        }
    }
    total / n as f64
}

/// Cuts an average-linkage dendrogram into `k` flat clusters. Labels are
/// numbered by first appearance so the output is deterministic.
pub fn cut_clusters(dist: &CondensedDistances, k: usize) -> Vec<usize> {
    let n = dist.len();
    let k = k.clamp(1, n.max(1));
    let mut condensed = dist.data.clone();
    let dendrogram = linkage(&mut condensed, n, Method::Average);
    let mut parent: Vec<usize> = (0..2 * n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for (step_idx, step) in dendrogram.steps().iter().take(n - k).enumerate() {
        let new_label = n + step_idx;
        let a = find(&mut parent, step.cluster1);
        let b = find(&mut parent, step.cluster2);
        parent[a] = new_label;
        parent[b] = new_label;
    }
    let mut relabel = std::collections::HashMap::new();
    (0..n)
        .map(|i| {
            let root = find(&mut parent, i);
            let next = relabel.len();
            *relabel.entry(root).or_insert(next)
        })
        .collect()
}

/// A clustering outcome: per-cluster member indices, ordered by first member.
#[derive(Clone, Debug, PartialEq)]
pub struct Clustering {
    pub k: usize,
    pub silhouette: f64,
    pub members: Vec<Vec<usize>>,
}

/// Chooses `k` in `[2, max_clusters]` by maximal mean silhouette. Returns
/// `None` when a single centroid should be kept: fewer than two distinct
/// vectors, or no `k` with positive silhouette.
pub fn cluster_node(vectors: &[ViewVector<'_>], max_clusters: usize) -> Option<Clustering> {
    let n = vectors.len();
    if n < 3 || max_clusters < 2 {
        return None;
    }
    let dist = CondensedDistances::cosine(vectors);
    if dist.data.iter().all(|&d| d == 0.0) {
        return None;
    }
    let mut best: Option<(usize, f64, Vec<usize>)> = None;
    for k in 2..=max_clusters.min(n - 1) {
        let labels = cut_clusters(&dist, k);
        let s = silhouette_score(&dist, &labels);
        if best.as_ref().is_none_or(|(_, bs, _)| s > *bs) {
            best = Some((k, s, labels));
        }
    }
    let (k, silhouette, labels) = best?;
    if silhouette <= 0.0 {
        return None;
    }
    let mut members = vec![Vec::new(); k];
    for (i, &l) in labels.iter().enumerate() {
        members[l].push(i);
    }
    Some(Clustering { k, silhouette, members })
}
