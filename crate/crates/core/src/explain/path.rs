//! Path-based explanations.
//!
//! Existing simple paths between the two endpoints of a predicted link are
//! enumerated and ranked by how much their path type (the sequence of relation
//! types along the path) helps a random forest tell linked pairs from
//! unlinked ones. The forest is trained on binary path-type presence
//! features.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{NodeId, PropertyGraph};
use crate::rng::{derive_seed, rng_from_seed, StageRng};

pub const DEFAULT_MAX_LEN: usize = 4;
pub const DEFAULT_MAX_COUNT: usize = 200;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PathError {
    #[error("unknown node `{0}`")]
    UnknownNode(NodeId),
    #[error("path endpoints must differ (`{0}`)")]
    SameEndpoints(NodeId),
    #[error("no path types found between any training pair")]
    EmptyVocabulary,
    #[error("path ranker needs at least one positive and one negative pair")]
    MissingClass,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Path {
    pub nodes: Vec<NodeId>,
    pub relations: Vec<String>,
}

impl Path {
    pub fn len(&self) -> usize {
        self.relations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.relations.is_empty()
    }

    /// Simple, consecutive nodes adjacent through the stated relation.
    pub fn is_valid_in(&self, g: &PropertyGraph) -> bool {
        if self.nodes.len() != self.relations.len() + 1 || self.relations.is_empty() {
            return false;
        }
        let Some(idx) = self
            .nodes
            .iter()
            .map(|n| g.index_of(n))
            .collect::<Option<Vec<_>>>()
        else {
            return false;
        };
        let distinct: BTreeSet<usize> = idx.iter().copied().collect();
        distinct.len() == idx.len()
            && idx
                .windows(2)
                .zip(&self.relations)
                .all(|(w, r)| g.find_edge(w[0], w[1], r).is_some())
    }
}

fn path_order(a: &Path, b: &Path) -> Ordering {
    a.len()
        .cmp(&b.len())
        .then_with(|| a.nodes.cmp(&b.nodes))
        .then_with(|| a.relations.cmp(&b.relations))
}

/// All simple paths from `u` to `v` of length at most `max_len`, shortest
/// first, capped at `max_count`. Length-one paths (direct edges) are
/// returned only when `include_direct` is set.
pub fn enumerate_paths(
    g: &PropertyGraph,
    u: &NodeId,
    v: &NodeId,
    max_len: usize,
    max_count: usize,
    include_direct: bool,
) -> Result<Vec<Path>, PathError> {
    let s = g
        .index_of(u)
        .ok_or_else(|| PathError::UnknownNode(u.clone()))?;
    let t = g
        .index_of(v)
        .ok_or_else(|| PathError::UnknownNode(v.clone()))?;
    if s == t {
        return Err(PathError::SameEndpoints(u.clone()));
    }
    let mut found: Vec<(Vec<usize>, Vec<usize>)> = Vec::new();
    let mut on_path = vec![false; g.node_count()];
    let mut nodes = vec![s];
    let mut edges = Vec::new();
    on_path[s] = true;
    dfs(g, t, max_len, &mut on_path, &mut nodes, &mut edges, &mut found);

    let mut paths: Vec<Path> = found
        .into_iter()
        .filter(|(_, e)| include_direct || e.len() > 1)
        .map(|(n, e)| Path {
            nodes: n.iter().map(|&i| g.node(i).id.clone()).collect(),
            relations: e.iter().map(|&i| g.edge(i).relation_type.clone()).collect(),
        })
        .collect();
    paths.sort_by(path_order);
    paths.truncate(max_count);
    Ok(paths)
}

fn dfs(
    g: &PropertyGraph,
    target: usize,
    max_len: usize,
    on_path: &mut [bool],
    nodes: &mut Vec<usize>,
    edges: &mut Vec<usize>,
    found: &mut Vec<(Vec<usize>, Vec<usize>)>,
) {
    if edges.len() == max_len {
        return;
    }
    let here = *nodes.last().expect("path starts non-empty");
    for inc in g.incidences(here) {
        let next = inc.neighbor;
        if on_path[next] {
            continue;
        }
        edges.push(inc.edge);
        nodes.push(next);
        if next == target {
            found.push((nodes.clone(), edges.clone()));
        } else {
            on_path[next] = true;
            dfs(g, target, max_len, on_path, nodes, edges, found);
            on_path[next] = false;
        }
        nodes.pop();
        edges.pop();
    }
}

/// Node-free abstraction of a path: its relation sequence, with
/// intermediate node labels interleaved when the graph mixes labels.
/// Stored in the lexicographically smaller of its two reading directions.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PathType(pub Vec<String>);

impl PathType {
    pub fn of(g: &PropertyGraph, path: &Path, with_labels: bool) -> PathType {
        let mut tokens = Vec::with_capacity(path.len() * 2);
        for (i, rel) in path.relations.iter().enumerate() {
            if i > 0 && with_labels {
                let node = g.index_of(&path.nodes[i]).expect("path nodes exist");
                tokens.push(g.node(node).label.to_string());
            }
            tokens.push(rel.clone());
        }
        let mut reversed = tokens.clone();
        reversed.reverse();
        PathType(tokens.min(reversed))
    }
}

impl fmt::Display for PathType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.join(" > "))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub trees: usize,
    pub max_depth: usize,
    pub max_len: usize,
    pub max_count: usize,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            trees: 50,
            max_depth: 3,
            max_len: DEFAULT_MAX_LEN,
            max_count: DEFAULT_MAX_COUNT,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum ForestNode {
    Leaf {
        positive_fraction: f64,
    },
    /// Rows lacking `feature` go left.
    Split {
        feature: usize,
        absent: Box<ForestNode>,
        present: Box<ForestNode>,
    },
}

impl ForestNode {
    fn leaf_fraction(&self, x: &[bool]) -> f64 {
        let mut node = self;
        loop {
            match node {
                ForestNode::Leaf { positive_fraction } => return *positive_fraction,
                ForestNode::Split {
                    feature,
                    absent,
                    present,
                } => node = if x[*feature] { present } else { absent },
            }
        }
    }

    pub fn vote(&self, x: &[bool]) -> bool {
        self.leaf_fraction(x) > 0.5
    }

    pub fn depth(&self) -> usize {
        match self {
            ForestNode::Leaf { .. } => 0,
            ForestNode::Split {
                absent, present, ..
            } => 1 + absent.depth().max(present.depth()),
        }
    }
}

fn gini(pos: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = pos as f64 / n as f64;
    2.0 * p * (1.0 - p)
}

/// Number of features tried at each split: `max(1, ⌈√p⌉)`.
pub fn features_per_split(p: usize) -> usize {
    ((p as f64).sqrt().ceil() as usize).clamp(1, p.max(1))
}

struct TreeBuilder<'a> {
    x: &'a [Vec<bool>],
    y: &'a [bool],
    max_depth: usize,
    mtry: usize,
    importance: Vec<f64>,
}

impl TreeBuilder<'_> {
    fn grow(&mut self, rows: &[usize], depth: usize, rng: &mut StageRng) -> ForestNode {
        let n = rows.len();
        let pos = rows.iter().filter(|&&r| self.y[r]).count();
        let leaf = ForestNode::Leaf {
            positive_fraction: if n == 0 { 0.0 } else { pos as f64 / n as f64 },
        };
        if depth >= self.max_depth || pos == 0 || pos == n || n < 2 {
            return leaf;
        }
        let p = self.x[0].len();
        let mut tried = index::sample(rng, p, self.mtry).into_vec();
        tried.sort_unstable();
        let parent = gini(pos, n) * n as f64;
        let mut best: Option<(f64, usize)> = None;
        for f in tried {
            let (mut n1, mut p1) = (0, 0);
            for &r in rows {
                if self.x[r][f] {
                    n1 += 1;
                    p1 += usize::from(self.y[r]);
                }
            }
            let n0 = n - n1;
            if n0 == 0 || n1 == 0 {
                continue;
            }
            let decrease = parent - gini(pos - p1, n0) * n0 as f64 - gini(p1, n1) * n1 as f64;
            if decrease > 1e-12 && best.is_none_or(|(d, _)| decrease > d) {
                best = Some((decrease, f));
            }
        }
        let Some((decrease, feature)) = best else {
            return leaf;
        };
        self.importance[feature] += decrease;
        let (present, absent): (Vec<usize>, Vec<usize>) =
            rows.iter().partition(|&&r| self.x[r][feature]);
        let absent = Box::new(self.grow(&absent, depth + 1, rng));
        let present = Box::new(self.grow(&present, depth + 1, rng));
        ForestNode::Split {
            feature,
            absent,
            present,
        }
    }
}

/// Seed of tree `t` in a forest trained with `seed`.
pub fn tree_seed(seed: u64, t: usize) -> u64 {
    derive_seed(seed, &format!("path-forest-tree-{t}"))
}

/// Bagged depth-limited Gini trees over binary features.
///
/// Tree `t` draws from `rng_from_seed(tree_seed(seed, t))`: first `n`
/// bootstrap indices, then, at each node in pre-order (absent branch before
/// present branch), `features_per_split(p)` candidate features.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub trees: Vec<ForestNode>,
    /// Mean decrease in Gini impurity per feature, normalized to sum to 1.
    pub importances: Vec<f64>,
    pub oob_accuracy: Option<f64>,
}

impl RandomForest {
    pub fn fit(x: &[Vec<bool>], y: &[bool], trees: usize, max_depth: usize, seed: u64) -> Self {
        let n = x.len();
        let p = x.first().map_or(0, Vec::len);
        let mut raw = vec![0.0; p];
        let mut fitted = Vec::with_capacity(trees);
        let mut oob_votes: Vec<(usize, usize)> = vec![(0, 0); n];
        for t in 0..trees {
            let mut rng = rng_from_seed(tree_seed(seed, t));
            let mut in_bag = vec![false; n];
            let rows: Vec<usize> = (0..n)
                .map(|_| {
                    let r = rng.random_range(0..n);
                    in_bag[r] = true;
                    r
                })
                .collect();
            let mut builder = TreeBuilder {
                x,
                y,
                max_depth,
                mtry: features_per_split(p),
                importance: vec![0.0; p],
            };
            let tree = builder.grow(&rows, 0, &mut rng);
            for (acc, imp) in raw.iter_mut().zip(&builder.importance) {
                *acc += imp;
            }
            for i in (0..n).filter(|&i| !in_bag[i]) {
                let vote = &mut oob_votes[i];
                vote.0 += 1;
                vote.1 += usize::from(tree.vote(&x[i]));
            }
            fitted.push(tree);
        }
        let total: f64 = raw.iter().sum();
        let importances = raw
            .iter()
            .map(|v| if total > 0.0 { v / total } else { 0.0 })
            .collect();
        let judged: Vec<(usize, bool)> = oob_votes
            .iter()
            .enumerate()
            .filter(|(_, (k, _))| *k > 0)
            .map(|(i, &(k, pos))| (i, 2 * pos > k))
            .collect();
        let oob_accuracy = (!judged.is_empty()).then(|| {
            judged.iter().filter(|&&(i, pred)| pred == y[i]).count() as f64 / judged.len() as f64
        });
        RandomForest {
            trees: fitted,
            importances,
            oob_accuracy,
        }
    }

    /// Majority vote; ties go to the negative class.
    pub fn predict(&self, x: &[bool]) -> bool {
        let pos = self.trees.iter().filter(|t| t.vote(x)).count();
        2 * pos > self.trees.len()
    }
}

/// Random-forest path-type model used to score explanation paths.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathRanker {
    pub vocabulary: Vec<PathType>,
    pub forest: RandomForest,
    pub with_labels: bool,
    pub config: ForestConfig,
    pub version: String,
}

/// Path types present between each pair.
pub fn pair_path_types(
    g: &PropertyGraph,
    pairs: &[(NodeId, NodeId)],
    max_len: usize,
    max_count: usize,
    with_labels: bool,
) -> Result<Vec<BTreeSet<PathType>>, PathError> {
    pairs
        .iter()
        .map(|(u, v)| {
            Ok(enumerate_paths(g, u, v, max_len, max_count, false)?
                .iter()
                .map(|p| PathType::of(g, p, with_labels))
                .collect())
        })
        .collect()
}

pub fn train_path_ranker(
    g: &PropertyGraph,
    positive_pairs: &[(NodeId, NodeId)],
    negative_pairs: &[(NodeId, NodeId)],
    config: &ForestConfig,
) -> Result<PathRanker, PathError> {
    if positive_pairs.is_empty() || negative_pairs.is_empty() {
        return Err(PathError::MissingClass);
    }
    let with_labels = g.labels().len() > 1;
    let pairs: Vec<(NodeId, NodeId)> = positive_pairs
        .iter()
        .chain(negative_pairs)
        .cloned()
        .collect();
    let types = pair_path_types(g, &pairs, config.max_len, config.max_count, with_labels)?;
    let vocabulary: Vec<PathType> = types
        .iter()
        .flatten()
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if vocabulary.is_empty() {
        return Err(PathError::EmptyVocabulary);
    }
    let slot: BTreeMap<&PathType, usize> = vocabulary.iter().zip(0..).collect();
    let x: Vec<Vec<bool>> = types
        .iter()
        .map(|set| {
            let mut row = vec![false; vocabulary.len()];
            for t in set {
                row[slot[t]] = true;
            }
            row
        })
        .collect();
    let y: Vec<bool> = (0..pairs.len()).map(|i| i < positive_pairs.len()).collect();
    let forest = RandomForest::fit(&x, &y, config.trees, config.max_depth, config.seed);
    Ok(PathRanker {
        version: format!(
            "path-forest/1 trees={} depth={} max_len={} seed={}",
            config.trees, config.max_depth, config.max_len, config.seed
        ),
        vocabulary,
        forest,
        with_labels,
        config: config.clone(),
    })
}

impl PathRanker {
    pub fn importance(&self, t: &PathType) -> f64 {
        self.vocabulary
            .binary_search(t)
            .map(|i| self.forest.importances[i])
            .unwrap_or(0.0)
    }

    /// Path types by importance, highest first.
    pub fn ranked_types(&self) -> Vec<(PathType, f64)> {
        let mut out: Vec<(PathType, f64)> = self
            .vocabulary
            .iter()
            .cloned()
            .zip(self.forest.importances.iter().copied())
            .collect();
        out.sort_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .unwrap_or(Ordering::Equal)
                .then_with(|| a.0.cmp(&b.0))
        });
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoredPath {
    pub nodes: Vec<NodeId>,
    pub relations: Vec<String>,
    pub path_type: String,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankedPathExplanation {
    pub pair: (NodeId, NodeId),
    pub paths: Vec<ScoredPath>,
    pub top_path: Option<ScoredPath>,
    pub ranker_version: String,
}

/// Score paths by the importance of their type (unseen types score 0) and
/// sort by score, then length, then node ids.
pub fn rank_paths(
    ranker: &PathRanker,
    g: &PropertyGraph,
    pair: (NodeId, NodeId),
    paths: &[Path],
) -> RankedPathExplanation {
    let mut scored: Vec<(f64, &Path, PathType)> = paths
        .iter()
        .map(|p| {
            let t = PathType::of(g, p, ranker.with_labels);
            (ranker.importance(&t), p, t)
        })
        .collect();
    scored.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .unwrap_or(Ordering::Equal)
            .then_with(|| path_order(a.1, b.1))
    });
    let paths: Vec<ScoredPath> = scored
        .into_iter()
        .map(|(score, p, t)| ScoredPath {
            nodes: p.nodes.clone(),
            relations: p.relations.clone(),
            path_type: t.to_string(),
            score,
        })
        .collect();
    RankedPathExplanation {
        pair,
        top_path: paths.first().cloned(),
        paths,
        ranker_version: ranker.version.clone(),
    }
}
