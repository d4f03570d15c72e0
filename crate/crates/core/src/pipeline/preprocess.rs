use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::clean::CleanSample;
use crate::error::{Error, Result};
use crate::representation::embed::{fnv1a, splitmix64};
use crate::taxonomy::CategoryPath;

pub const DEFAULT_MIN_SAMPLES: usize = 10;
pub const DEFAULT_MAX_PER_CATEGORY: usize = 200;

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergeReport {
    /// (from, to, samples moved)
    pub merged: Vec<(CategoryPath, CategoryPath, usize)>,
    /// (category, samples dropped)
    pub removed: Vec<(CategoryPath, usize)>,
}

/// Relabels every category below `min_samples` to its parent, deepest
/// first, so merged samples count toward the parent's total. A depth-2
/// category below the threshold has nowhere to go and is removed.
pub fn merge_small_categories(samples: Vec<CleanSample>, min_samples: usize) -> (Vec<CleanSample>, MergeReport) {
    let mut counts: BTreeMap<CategoryPath, usize> = BTreeMap::new();
    for s in &samples {
        *counts.entry(s.path.clone()).or_insert(0) += 1;
    }
    let mut target: BTreeMap<CategoryPath, Option<CategoryPath>> = BTreeMap::new();
    let mut report = MergeReport::default();
    let max_depth = counts.keys().map(CategoryPath::depth).max().unwrap_or(0);
    for depth in (2..=max_depth).rev() {
        let small: Vec<(CategoryPath, usize)> = counts
            .iter()
            .filter(|(p, &c)| p.depth() == depth && c < min_samples)
            .map(|(p, &c)| (p.clone(), c))
            .collect();
        for (path, n) in small {
            counts.remove(&path);
            if depth > 2 {
                let parent = path.parent().expect("depth > 1");
                *counts.entry(parent.clone()).or_insert(0) += n;
                report.merged.push((path.clone(), parent.clone(), n));
                target.insert(path, Some(parent));
            } else {
                report.removed.push((path.clone(), n));
                target.insert(path, None);
            }
        }
    }
    let resolve = |p: &CategoryPath| {
        let mut cur = p.clone();
        while let Some(next) = target.get(&cur) {
            cur = next.clone()?;
        }
        Some(cur)
    };
    let out = samples
        .into_iter()
        .filter_map(|s| {
            let dest = resolve(&s.path)?;
            Some(if dest == s.path { s } else { s.relabeled(dest) })
        })
        .collect();
    (out, report)
}

/// Stable per-sample random key: a function of the seed and the sample id only.
fn rank_key(seed: u64, id: &str) -> u64 {
    splitmix64(seed ^ fnv1a(id.as_bytes()))
}

fn group_by_path(samples: &[CleanSample]) -> BTreeMap<&CategoryPath, Vec<usize>> {
    let mut groups: BTreeMap<&CategoryPath, Vec<usize>> = BTreeMap::new();
    for (i, s) in samples.iter().enumerate() {
        groups.entry(&s.path).or_default().push(i);
    }
    groups
}

fn shuffled(samples: &[CleanSample], mut idx: Vec<usize>, seed: u64) -> Vec<usize> {
    idx.sort_by(|&a, &b| {
        rank_key(seed, &samples[a].id)
            .cmp(&rank_key(seed, &samples[b].id))
            .then_with(|| samples[a].id.cmp(&samples[b].id))
            .then(a.cmp(&b))
    });
    idx
}

/// Keeps a seeded uniform subsample of `max_per_category` from each larger
/// category. Surviving samples keep their input order.
pub fn balance_cap(samples: Vec<CleanSample>, max_per_category: usize, seed: u64) -> Vec<CleanSample> {
    let mut keep = vec![true; samples.len()];
    for (_, idx) in group_by_path(&samples) {
        if idx.len() > max_per_category {
            for i in shuffled(&samples, idx, seed).into_iter().skip(max_per_category) {
                keep[i] = false;
            }
        }
    }
    samples
        .into_iter()
        .zip(keep)
        .filter_map(|(s, k)| k.then_some(s))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitSpec {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
    pub seed: u64,
    pub stratify: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train: 0.8,
            validation: 0.1,
            test: 0.1,
            seed: 42,
            stratify: true,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        let f = [self.train, self.validation, self.test];
        if f.iter().any(|v| !(*v > 0.0 && v.is_finite())) || (f.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Config("split fractions must be positive and sum to 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Split {
    pub train: Vec<CleanSample>,
    pub validation: Vec<CleanSample>,
    pub test: Vec<CleanSample>,
    pub warnings: Vec<String>,
}

/// Largest-remainder allocation of `n` items; remainder ties go to the
/// earlier part. The first part always gets at least one item when n > 0.
pub fn allocate(n: usize, fractions: &[f64]) -> Vec<usize> {
    let quotas: Vec<f64> = fractions.iter().map(|f| f * n as f64).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..fractions.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().take(n.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    if n > 0 && counts[0] == 0 {
        let donor = (1..counts.len()).max_by_key(|&i| (counts[i], std::cmp::Reverse(i))).expect("at least two parts");
        counts[donor] -= 1;
        counts[0] += 1;
    }
    counts
}

/// Per-category seeded shuffle followed by proportional allocation.
pub fn stratified_split(samples: &[CleanSample], spec: &SplitSpec) -> Result<Split> {
    spec.validate()?;
    let fractions = [spec.train, spec.validation, spec.test];
    let groups: Vec<(String, Vec<usize>)> = if spec.stratify {
        group_by_path(samples)
            .into_iter()
            .map(|(p, idx)| (p.render(), idx))
            .collect()
    } else {
        vec![("all".into(), (0..samples.len()).collect())]
    };
    let mut split = Split::default();
    for (name, idx) in groups {
        if idx.len() < fractions.len() {
            let msg = format!(
                "category {name} has {} samples, fewer than the {} split parts; allocating to train first",
                idx.len(),
                fractions.len()
            );
            log::warn!("{msg}");
            split.warnings.push(msg);
        }
        let counts = allocate(idx.len(), &fractions);
        let order = shuffled(samples, idx, spec.seed);
        let (train, rest) = order.split_at(counts[0]);
        let (validation, test) = rest.split_at(counts[1]);
        split.train.extend(train.iter().map(|&i| samples[i].clone()));
        split.validation.extend(validation.iter().map(|&i| samples[i].clone()));
        split.test.extend(test.iter().map(|&i| samples[i].clone()));
    }
    Ok(split)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::HashSet;

    fn p(s: &str) -> CategoryPath {
        CategoryPath::parse(s).unwrap()
    }

    fn make(path: &str, n: usize, offset: usize) -> Vec<CleanSample> {
        (0..n)
            .map(|i| CleanSample::new(format!("id{}", offset + i), "t", "d", p(path)))
            .collect()
    }

    fn counts(samples: &[CleanSample]) -> BTreeMap<CategoryPath, usize> {
        let mut c = BTreeMap::new();
        for s in samples {
            *c.entry(s.path.clone()).or_insert(0) += 1;
        }
        c
    }

    #[test]
    fn merge_examples() {
        let mut s = make("A/B/C", 2, 0);
        s.extend(make("A/B", 10, 100));
        s.extend(make("X/Y", 2, 200));
        let (out, rep) = merge_small_categories(s, 5);
        let c = counts(&out);
        assert_eq!(c.get(&p("A/B")), Some(&12));
        assert!(!c.contains_key(&p("A/B/C")));
        assert!(!c.contains_key(&p("X/Y")));
        assert_eq!(rep.merged, vec![(p("A/B/C"), p("A/B"), 2)]);
        assert_eq!(rep.removed, vec![(p("X/Y"), 2)]);
    }

    #[test]
    fn merge_cascades() {
        // two small leaves push the parent over the threshold
        let mut s = make("A/B/C/D", 3, 0);
        s.extend(make("A/B/C/E", 3, 10));
        s.extend(make("A/B/F", 1, 20));
        let (out, _) = merge_small_categories(s, 5);
        let c = counts(&out);
        assert_eq!(c.get(&p("A/B/C")), Some(&6));
        // A/B/F alone moves to A/B with 1, then A/B is removed
        assert!(!c.contains_key(&p("A/B")));
        assert_eq!(out.len(), 6);
    }

    #[test]
    fn cap_examples() {
        let s = make("A/B", 5, 0);
        assert_eq!(balance_cap(s.clone(), 5, 1), s);
        let big = make("A/B", 10, 0);
        let a = balance_cap(big.clone(), 5, 3);
        assert_eq!(a.len(), 5);
        assert_eq!(a, balance_cap(big.clone(), 5, 3));
        assert_ne!(a, balance_cap(big, 5, 4));
    }

    #[test]
    fn split_ten_is_8_1_1() {
        let s = make("A/B", 10, 0);
        let sp = stratified_split(&s, &SplitSpec::default()).unwrap();
        assert_eq!((sp.train.len(), sp.validation.len(), sp.test.len()), (8, 1, 1));
        assert!(sp.warnings.is_empty());
        let tiny = make("A/C", 2, 50);
        let sp = stratified_split(&tiny, &SplitSpec::default()).unwrap();
        assert_eq!(sp.train.len(), 2);
        assert_eq!(sp.warnings.len(), 1);
        assert!(stratified_split(&s, &SplitSpec { train: 0.9, ..SplitSpec::default() }).is_err());
    }

    #[test]
    fn allocate_examples() {
        assert_eq!(allocate(10, &[0.8, 0.1, 0.1]), vec![8, 1, 1]);
        assert_eq!(allocate(1, &[0.8, 0.1, 0.1]), vec![1, 0, 0]);
        assert_eq!(allocate(5, &[0.8, 0.1, 0.1]), vec![4, 1, 0]);
        assert_eq!(allocate(0, &[0.8, 0.1, 0.1]), vec![0, 0, 0]);
        assert_eq!(allocate(1, &[0.1, 0.45, 0.45]), vec![1, 0, 0]);
    }

    fn arb_dataset() -> impl Strategy<Value = Vec<CleanSample>> {
        let paths = ["A/B", "A/B/C", "A/B/C/D", "A/E", "F/G", "F/G/H", "F/G/I", "F/J/K/L/M"];
        proptest::collection::vec(0usize..paths.len(), 0..150).prop_map(move |labels| {
            labels
                .iter()
                .enumerate()
                .map(|(i, &l)| CleanSample::new(format!("s{i}"), "t", "d", p(paths[l])))
                .collect()
        })
    }

    proptest! {
        #[test]
        fn merge_postconditions(data in arb_dataset(), min in 1usize..15) {
            let before: HashSet<CategoryPath> = data.iter().map(|s| s.path.clone()).collect();
            let depths: BTreeMap<String, usize> = data.iter().map(|s| (s.id.clone(), s.path.depth())).collect();
            let (out, _) = merge_small_categories(data, min);
            for (path, n) in counts(&out) {
                prop_assert!(n >= min, "{} has {}", path, n);
            }
            for s in &out {
                prop_assert!(s.path.depth() <= depths[&s.id]);
                prop_assert!(before.iter().any(|b| b == &s.path || s.path.is_ancestor_of(b)));
            }
        }

        #[test]
        fn split_partitions_exactly(data in arb_dataset(), seed in 0u64..1000) {
            let sp = stratified_split(&data, &SplitSpec { seed, ..SplitSpec::default() }).unwrap();
            let mut ids: Vec<&str> = sp.train.iter().chain(&sp.validation).chain(&sp.test).map(|s| s.id.as_str()).collect();
            prop_assert_eq!(ids.len(), data.len());
            ids.sort();
            ids.dedup();
            prop_assert_eq!(ids.len(), data.len());
            let all = counts(&data);
            let train = counts(&sp.train);
            for (path, n) in &all {
                let t = train.get(path).copied().unwrap_or(0) as f64;
                prop_assert!((t - 0.8 * *n as f64).abs() <= 1.0);
                prop_assert!(t >= 1.0);
            }
            let c = all.len().max(1) as f64;
            let n = data.len().max(1) as f64;
            prop_assert!((sp.train.len() as f64 / n - 0.8).abs() <= c / n + 1e-12);
        }
    }
}
