//! Held-out positive links and matched corrupted negatives.
//!
//! Positives are chosen by ranking every edge on a seeded hash of its
//! canonical key and taking the lowest `⌈ratio·|E|⌉`. Negatives keep one
//! endpoint of a positive and pair it with a random node that is not adjacent
//! to it in the original graph.

use std::collections::HashSet;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{NodeId, PropertyGraph};
use crate::rng::{fnv1a, splitmix64, stage_rng, StageRng};

/// Rejection attempts per endpoint before falling back to enumeration.
pub const DEFAULT_MAX_ATTEMPTS: usize = 100;
pub const DEFAULT_SPLIT_RATIO: f64 = 0.10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleLabel {
    Positive,
    Negative,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleOrigin {
    HeldOutEdge,
    Corrupted,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LinkSample {
    pub u: NodeId,
    pub v: NodeId,
    pub label: SampleLabel,
    pub origin: SampleOrigin,
}

impl LinkSample {
    pub fn is_positive(&self) -> bool {
        self.label == SampleLabel::Positive
    }
}

/// Line record of the sample file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub u: NodeId,
    pub v: NodeId,
    pub label: SampleLabel,
    pub origin: SampleOrigin,
    pub seed: u64,
}

impl SampleRecord {
    pub fn into_sample(self) -> LinkSample {
        LinkSample {
            u: self.u,
            v: self.v,
            label: self.label,
            origin: self.origin,
        }
    }
}

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error("ratio {0} must lie strictly between 0 and 1")]
    InvalidRatio(f64),
    #[error("graph has {edges} edges; ratio {ratio} selects no positives")]
    TooFewEdges { edges: usize, ratio: f64 },
    #[error("node `{0}` is adjacent to every other node")]
    SaturatedNode(NodeId),
    #[error("both endpoints of ({0}, {1}) are saturated")]
    NoCandidates(NodeId, NodeId),
    #[error("unknown node `{0}`")]
    UnknownNode(NodeId),
}

#[derive(Clone, Debug)]
pub struct SampleSplit {
    /// The input graph with the held-out positives removed.
    pub training_graph: PropertyGraph,
    pub positives: Vec<LinkSample>,
    pub negatives: Vec<LinkSample>,
    pub seed: u64,
}

impl SampleSplit {
    pub fn records(&self) -> Vec<SampleRecord> {
        self.positives
            .iter()
            .chain(&self.negatives)
            .map(|s| SampleRecord {
                u: s.u.clone(),
                v: s.v.clone(),
                label: s.label,
                origin: s.origin,
                seed: self.seed,
            })
            .collect()
    }

    pub fn samples(&self) -> impl Iterator<Item = &LinkSample> {
        self.positives.iter().chain(&self.negatives)
    }
}

/// Seeded priority of an edge; the lowest priorities are held out.
pub fn edge_priority(seed: u64, g: &PropertyGraph, edge: usize) -> u64 {
    let e = g.edge(edge);
    let (a, b) = if e.source <= e.target {
        (&e.source, &e.target)
    } else {
        (&e.target, &e.source)
    };
    let key = format!("{a}\u{1f}{b}\u{1f}{}", e.relation_type);
    splitmix64(seed ^ fnv1a(key.as_bytes()))
}

/// `⌈ratio·edges⌉`, ignoring the rounding error in products like `0.1 × 30`.
pub fn positive_count(edges: usize, ratio: f64) -> usize {
    (ratio * edges as f64 - 1e-9).ceil().max(0.0) as usize
}

/// Hold out `⌈ratio·|E|⌉` edges. The returned split has no negatives yet.
pub fn split_positives(
    g: &PropertyGraph,
    ratio: f64,
    seed: u64,
) -> Result<SampleSplit, SamplerError> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(SamplerError::InvalidRatio(ratio));
    }
    let take = positive_count(g.edge_count(), ratio);
    if take == 0 {
        return Err(SamplerError::TooFewEdges {
            edges: g.edge_count(),
            ratio,
        });
    }
    let mut ranked: Vec<(u64, usize)> = (0..g.edge_count())
        .map(|e| (edge_priority(seed, g, e), e))
        .collect();
    ranked.select_nth_unstable(take - 1);
    let mut chosen: Vec<usize> = ranked[..take].iter().map(|&(_, e)| e).collect();
    chosen.sort_unstable();

    let positives = chosen
        .iter()
        .map(|&e| {
            let edge = g.edge(e);
            LinkSample {
                u: edge.source.clone(),
                v: edge.target.clone(),
                label: SampleLabel::Positive,
                origin: SampleOrigin::HeldOutEdge,
            }
        })
        .collect();
    let removed: HashSet<usize> = chosen.into_iter().collect();
    Ok(SampleSplit {
        training_graph: g.without_edges(&removed),
        positives,
        negatives: Vec::new(),
        seed,
    })
}

/// Pick a node that is neither `node` nor adjacent to it.
pub fn corrupt_endpoint(
    g: &PropertyGraph,
    node: usize,
    rng: &mut StageRng,
    max_attempts: usize,
) -> Result<usize, SamplerError> {
    let n = g.node_count();
    for _ in 0..max_attempts {
        let c = rng.random_range(0..n);
        if c != node && !g.is_adjacent(node, c) {
            return Ok(c);
        }
    }
    let eligible: Vec<usize> = (0..n)
        .filter(|&c| c != node && !g.is_adjacent(node, c))
        .collect();
    if eligible.is_empty() {
        return Err(SamplerError::SaturatedNode(g.node(node).id.clone()));
    }
    Ok(eligible[rng.random_range(0..eligible.len())])
}

/// One corrupted negative per positive, drawn against `original`.
///
/// The first endpoint is corrupted first; the second is tried only when the
/// first is saturated.
pub fn sample_negatives(
    original: &PropertyGraph,
    positives: &[LinkSample],
    seed: u64,
) -> Result<Vec<LinkSample>, SamplerError> {
    sample_negatives_with(original, positives, seed, DEFAULT_MAX_ATTEMPTS)
}

pub fn sample_negatives_with(
    original: &PropertyGraph,
    positives: &[LinkSample],
    seed: u64,
    max_attempts: usize,
) -> Result<Vec<LinkSample>, SamplerError> {
    let mut rng = stage_rng(seed, "negatives");
    let lookup = |id: &NodeId| {
        original
            .index_of(id)
            .ok_or_else(|| SamplerError::UnknownNode(id.clone()))
    };
    let mut out = Vec::with_capacity(positives.len());
    for pos in positives {
        let u = lookup(&pos.u)?;
        let v = lookup(&pos.v)?;
        let (kept, other) = match corrupt_endpoint(original, u, &mut rng, max_attempts) {
            Ok(c) => (u, c),
            Err(SamplerError::SaturatedNode(_)) => {
                match corrupt_endpoint(original, v, &mut rng, max_attempts) {
                    Ok(c) => (v, c),
                    Err(SamplerError::SaturatedNode(_)) => {
                        return Err(SamplerError::NoCandidates(pos.u.clone(), pos.v.clone()))
                    }
                    Err(e) => return Err(e),
                }
            }
            Err(e) => return Err(e),
        };
        out.push(LinkSample {
            u: original.node(kept).id.clone(),
            v: original.node(other).id.clone(),
            label: SampleLabel::Negative,
            origin: SampleOrigin::Corrupted,
        });
    }
    Ok(out)
}

/// Split and negative-sample one graph in a single step.
pub fn split_with_negatives(
    g: &PropertyGraph,
    ratio: f64,
    seed: u64,
) -> Result<SampleSplit, SamplerError> {
    let mut split = split_positives(g, ratio, seed)?;
    split.negatives = sample_negatives(g, &split.positives, seed)?;
    Ok(split)
}
