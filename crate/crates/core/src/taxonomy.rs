//! Category paths and the rooted taxonomy tree built from labeled samples.
//!
//! The tree has an implicit virtual root. Depth is counted from the first
//! real segment, so `A/B` has depth 2. Nodes that carry no direct samples
//! but have children are *stale*: they stay in the tree for ancestor credit
//! and centroid pooling, but are never prediction targets.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};

/// A root-to-node category path such as `Incident/Hardware/Server`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CategoryPath {
    segments: Vec<String>,
}

impl CategoryPath {
    /// Parses a slash-separated path. Segments are NFC-normalized and
    /// trimmed; comparison afterwards is byte-exact (no case folding).
    pub fn parse(raw: &str) -> Result<Self> {
        let invalid = |reason| Error::InvalidPath {
            raw: raw.to_string(),
            reason,
        };
        if raw.trim().is_empty() {
            return Err(invalid("empty path"));
        }
        let mut segments = Vec::new();
        for seg in raw.split('/') {
            let normalized: String = seg.nfc().collect();
            let trimmed = normalized.trim();
            if trimmed.is_empty() {
                return Err(invalid("empty segment"));
            }
            segments.push(trimmed.to_string());
        }
        Ok(Self { segments })
    }

    pub fn from_segments<I, S>(segments: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let joined: Vec<String> = segments
            .into_iter()
            .map(|s| s.as_ref().to_string())
            .collect();
        if joined.iter().any(|s| s.contains('/')) {
            return Err(Error::InvalidPath {
                raw: joined.join("/"),
                reason: "segment contains '/'",
            });
        }
        Self::parse(&joined.join("/"))
    }

    pub fn segments(&self) -> &[String] {
        &self.segments
    }

    pub fn depth(&self) -> usize {
        self.segments.len()
    }

    /// Canonical `Seg1/Seg2/...` rendering.
    pub fn render(&self) -> String {
        self.segments.join("/")
    }

    /// The prefix of the given depth, or `None` when `depth` is out of range.
    pub fn prefix(&self, depth: usize) -> Option<CategoryPath> {
        if depth == 0 || depth > self.depth() {
            return None;
        }
        Some(Self {
            segments: self.segments[..depth].to_vec(),
        })
    }

    /// Parent path; `None` for a top-level category (its parent is the virtual root).
    pub fn parent(&self) -> Option<CategoryPath> {
        self.prefix(self.depth() - 1)
    }

    pub fn child(&self, segment: &str) -> Result<CategoryPath> {
        let mut segs = self.segments.clone();
        segs.push(segment.to_string());
        Self::from_segments(segs)
    }

    /// All prefixes of length 1..=depth, root-most first. Excludes the virtual root.
    pub fn ancestors(&self) -> impl Iterator<Item = CategoryPath> + '_ {
        (1..=self.depth()).map(move |d| Self {
            segments: self.segments[..d].to_vec(),
        })
    }

    pub fn is_ancestor_of(&self, other: &CategoryPath) -> bool {
        self.depth() <= other.depth() && other.segments[..self.depth()] == self.segments[..]
    }
}

impl fmt::Display for CategoryPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

impl FromStr for CategoryPath {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s)
    }
}

impl Serialize for CategoryPath {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.render())
    }
}

impl<'de> Deserialize<'de> for CategoryPath {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        CategoryPath::parse(&raw).map_err(serde::de::Error::custom)
    }
}

/// Set of prefixes `{p[..1], ..., p[..depth]}` used by hierarchical metrics.
pub fn ancestor_set(path: &CategoryPath) -> BTreeSet<CategoryPath> {
    path.ancestors().collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NodeKind {
    Leaf,
    InternalWithSamples,
    Stale,
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NodeKind::Leaf => "leaf",
            NodeKind::InternalWithSamples => "internal",
            NodeKind::Stale => "stale",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TaxonomyNode {
    path: CategoryPath,
    children: BTreeSet<String>,
    direct_sample_count: u64,
}

impl TaxonomyNode {
    pub fn path(&self) -> &CategoryPath {
        &self.path
    }

    /// Canonical keys of the child nodes, in lexicographic order.
    pub fn children(&self) -> impl Iterator<Item = &str> {
        self.children.iter().map(String::as_str)
    }

    pub fn has_children(&self) -> bool {
        !self.children.is_empty()
    }

    pub fn direct_sample_count(&self) -> u64 {
        self.direct_sample_count
    }

    pub fn kind(&self) -> NodeKind {
        match (self.direct_sample_count > 0, self.has_children()) {
            (true, false) => NodeKind::Leaf,
            (true, true) => NodeKind::InternalWithSamples,
            // Childless nodes without samples can't be created by insertion.
            (false, _) => NodeKind::Stale,
        }
    }

    pub fn is_predictable(&self) -> bool {
        self.direct_sample_count > 0
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeCounts {
    pub nodes: usize,
    pub leaves: usize,
    pub internals: usize,
    pub stale: usize,
    pub predictable: usize,
}

/// Rooted category tree indexed by canonical path string.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TaxonomyTree {
    nodes: BTreeMap<String, TaxonomyNode>,
    roots: BTreeSet<String>,
}

impl TaxonomyTree {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_paths<'a, I>(paths: I) -> Self
    where
        I: IntoIterator<Item = &'a CategoryPath>,
    {
        let mut tree = Self::new();
        for p in paths {
            tree.insert_sample(p);
        }
        tree
    }

    /// Inserts one sample: creates any missing ancestors and increments the
    /// terminal node's direct count.
    pub fn insert_sample(&mut self, path: &CategoryPath) {
        self.insert_samples(path, 1);
    }

    pub fn insert_samples(&mut self, path: &CategoryPath, count: u64) {
        self.ensure_node(path);
        if let Some(node) = self.nodes.get_mut(&path.render()) {
            node.direct_sample_count += count;
        }
    }

    /// Makes sure `path` and all its ancestors exist. Returns the keys of newly created nodes.
    pub fn ensure_node(&mut self, path: &CategoryPath) -> Vec<String> {
        let mut created = Vec::new();
        let mut parent_key: Option<String> = None;
        for prefix in path.ancestors() {
            let key = prefix.render();
            if !self.nodes.contains_key(&key) {
                self.nodes.insert(
                    key.clone(),
                    TaxonomyNode {
                        path: prefix,
                        children: BTreeSet::new(),
                        direct_sample_count: 0,
                    },
                );
                created.push(key.clone());
            }
            match &parent_key {
                Some(pk) => {
                    if let Some(parent) = self.nodes.get_mut(pk) {
                        parent.children.insert(key.clone());
                    }
                }
                None => {
                    self.roots.insert(key.clone());
                }
            }
            parent_key = Some(key);
        }
        created
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn get(&self, key: &str) -> Option<&TaxonomyNode> {
        self.nodes.get(key)
    }

    pub fn node(&self, path: &CategoryPath) -> Option<&TaxonomyNode> {
        self.nodes.get(&path.render())
    }

    pub fn contains(&self, path: &CategoryPath) -> bool {
        self.nodes.contains_key(&path.render())
    }

    /// Nodes in lexicographic order of their canonical keys.
    pub fn nodes(&self) -> impl Iterator<Item = &TaxonomyNode> {
        self.nodes.values()
    }

    pub fn roots(&self) -> impl Iterator<Item = &str> {
        self.roots.iter().map(String::as_str)
    }

    /// Predictable targets: every node with direct samples, lexicographic order.
    pub fn enumerate_paths(&self) -> Vec<CategoryPath> {
        self.nodes
            .values()
            .filter(|n| n.is_predictable())
            .map(|n| n.path.clone())
            .collect()
    }

    /// Children-before-parent order; siblings visited lexicographically.
    pub fn post_order(&self) -> Vec<&TaxonomyNode> {
        let mut out = Vec::with_capacity(self.nodes.len());
        // Explicit stack: (key, children_pushed)
        let mut stack: Vec<(&str, bool)> = self.roots.iter().rev().map(|k| (k.as_str(), false)).collect();
        while let Some((key, expanded)) = stack.pop() {
            let node = &self.nodes[key];
            if expanded {
                out.push(node);
            } else {
                stack.push((key, true));
                for child in node.children.iter().rev() {
                    stack.push((child.as_str(), false));
                }
            }
        }
        out
    }

    pub fn counts(&self) -> TreeCounts {
        let mut c = TreeCounts {
            nodes: self.nodes.len(),
            ..TreeCounts::default()
        };
        for n in self.nodes.values() {
            if n.has_children() {
                c.internals += 1;
            } else {
                c.leaves += 1;
            }
            if n.kind() == NodeKind::Stale {
                c.stale += 1;
            }
            if n.is_predictable() {
                c.predictable += 1;
            }
        }
        c
    }

    /// Total direct samples per depth.
    pub fn sample_depth_histogram(&self) -> BTreeMap<usize, u64> {
        let mut hist = BTreeMap::new();
        for n in self.nodes.values() {
            if n.direct_sample_count > 0 {
                *hist.entry(n.path.depth()).or_insert(0) += n.direct_sample_count;
            }
        }
        hist
    }

    pub fn total_samples(&self) -> u64 {
        self.nodes.values().map(|n| n.direct_sample_count).sum()
    }

    /// Line-oriented `path<TAB>kind<TAB>count` dump for debugging.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        for n in self.nodes.values() {
            out.push_str(&format!("{}\t{}\t{}\n", n.path, n.kind(), n.direct_sample_count));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(s: &str) -> CategoryPath {
        CategoryPath::parse(s).unwrap()
    }

    #[test]
    fn parse_rejects_empty_segments() {
        for raw in ["", "  ", "A//B", "/A", "A/", "A/ /B"] {
            match CategoryPath::parse(raw) {
                Err(Error::InvalidPath { raw: r, .. }) => assert_eq!(r, raw),
                other => panic!("{raw:?} -> {other:?}"),
            }
        }
    }

    #[test]
    fn parse_trims_and_normalizes() {
        let a = p(" Net / Vpn ");
        assert_eq!(a.render(), "Net/Vpn");
        // "é" composed vs decomposed
        assert_eq!(p("Caf\u{e9}"), p("Cafe\u{301}"));
        assert_ne!(p("net"), p("Net"));
    }

    #[test]
    fn insert_creates_stale_ancestors() {
        let mut t = TaxonomyTree::new();
        t.insert_sample(&p("A/B/C"));
        assert_eq!(t.len(), 3);
        assert_eq!(t.get("A").unwrap().kind(), NodeKind::Stale);
        assert_eq!(t.get("A/B").unwrap().kind(), NodeKind::Stale);
        let leaf = t.get("A/B/C").unwrap();
        assert_eq!(leaf.kind(), NodeKind::Leaf);
        assert_eq!(leaf.direct_sample_count(), 1);
    }

    #[test]
    fn internal_with_samples() {
        let t = TaxonomyTree::from_paths(&[p("A/B"), p("A/B/C")]);
        assert_eq!(t.get("A/B").unwrap().kind(), NodeKind::InternalWithSamples);
        assert_eq!(t.get("A/B").unwrap().direct_sample_count(), 1);
        assert_eq!(t.get("A/B/C").unwrap().kind(), NodeKind::Leaf);
        assert_eq!(t.enumerate_paths(), vec![p("A/B"), p("A/B/C")]);
    }

    #[test]
    fn enumerate_skips_stale() {
        let t = TaxonomyTree::from_paths(&[p("X/Y/Z")]);
        assert_eq!(t.enumerate_paths(), vec![p("X/Y/Z")]);
        assert!(TaxonomyTree::new().enumerate_paths().is_empty());
    }

    #[test]
    fn post_order_chain_and_siblings() {
        let t = TaxonomyTree::from_paths(&[p("A/B/C")]);
        let order: Vec<String> = t.post_order().iter().map(|n| n.path().render()).collect();
        assert_eq!(order, ["A/B/C", "A/B", "A"]);

        let t = TaxonomyTree::from_paths(&[p("P/L1"), p("P/L2")]);
        let order: Vec<String> = t.post_order().iter().map(|n| n.path().render()).collect();
        assert_eq!(order, ["P/L1", "P/L2", "P"]);
    }

    #[test]
    fn ancestor_set_examples() {
        let s: Vec<String> = ancestor_set(&p("A/B/C")).iter().map(|x| x.render()).collect();
        assert_eq!(s, ["A", "A/B", "A/B/C"]);
        assert_eq!(ancestor_set(&p("A")).len(), 1);
    }

    #[test]
    fn counts_and_summary() {
        let t = TaxonomyTree::from_paths(&[p("A/B"), p("A/B/C"), p("A/D")]);
        let c = t.counts();
        assert_eq!(c.nodes, 4);
        assert_eq!(c.leaves, 2);
        assert_eq!(c.internals, 2);
        assert_eq!(c.stale, 1);
        assert_eq!(c.predictable, 3);
        assert_eq!(t.summary(), "A\tstale\t0\nA/B\tinternal\t1\nA/B/C\tleaf\t1\nA/D\tleaf\t1\n");
    }

    fn arb_path() -> impl Strategy<Value = CategoryPath> {
        prop::collection::vec(prop::sample::select(vec!["a", "b", "c", "d"]), 1..=5)
            .prop_map(|segs| CategoryPath::from_segments(segs).unwrap())
    }

    proptest! {
        #[test]
        fn render_parse_round_trip(path in arb_path()) {
            prop_assert_eq!(CategoryPath::parse(&path.render()).unwrap(), path);
        }

        #[test]
        fn ancestor_set_size_is_depth(path in arb_path()) {
            prop_assert_eq!(ancestor_set(&path).len(), path.depth());
        }

        #[test]
        fn post_order_children_first(paths in prop::collection::vec(arb_path(), 1..40)) {
            let t = TaxonomyTree::from_paths(&paths);
            let order = t.post_order();
            prop_assert_eq!(order.len(), t.len());
            let pos: BTreeMap<String, usize> =
                order.iter().enumerate().map(|(i, n)| (n.path().render(), i)).collect();
            for n in t.nodes() {
                for c in n.children() {
                    prop_assert!(pos[c] < pos[&n.path().render()]);
                }
            }
        }

        #[test]
        fn insertion_order_independent(mut paths in prop::collection::vec(arb_path(), 1..40), seed in any::<u64>()) {
            let a = TaxonomyTree::from_paths(&paths);
            // deterministic shuffle
            let n = paths.len();
            let mut s = seed;
            for i in (1..n).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                paths.swap(i, (s >> 33) as usize % (i + 1));
            }
            let b = TaxonomyTree::from_paths(&paths);
            prop_assert_eq!(a, b);
        }

        #[test]
        fn enumerate_never_stale(paths in prop::collection::vec(arb_path(), 1..40)) {
            let t = TaxonomyTree::from_paths(&paths);
            for path in t.enumerate_paths() {
                prop_assert_ne!(t.node(&path).unwrap().kind(), NodeKind::Stale);
            }
        }
    }
}
