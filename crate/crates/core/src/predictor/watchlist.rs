use std::cmp::Ordering;
use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::{PairEncoder, PositionEncoder, PredictorError, ScorerModel};
use crate::graph::{NodeId, PropertyGraph};

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkPrediction {
    pub u: NodeId,
    pub v: NodeId,
    pub score: f64,
    pub threshold: f64,
    pub decision: bool,
    pub model_seed: u64,
}

impl LinkPrediction {
    /// Stable identifier used by the review service.
    pub fn link_id(&self) -> String {
        format!("{}~{}", self.u, self.v)
    }
}

/// Score explicit pairs; no filtering or sorting.
pub fn score_pairs(
    model: &ScorerModel,
    encoder: &dyn PairEncoder,
    pairs: &[(NodeId, NodeId)],
    threshold: f64,
) -> Result<Vec<LinkPrediction>, PredictorError> {
    pairs
        .iter()
        .map(|(u, v)| {
            let score = model.score(&encoder.encode_ids(u, v)?)?;
            Ok(LinkPrediction {
                u: u.clone(),
                v: v.clone(),
                score,
                threshold,
                decision: score >= threshold,
                model_seed: model.seed,
            })
        })
        .collect()
}

/// Score every non-adjacent (watchlist, non-watchlist) pair and keep the
/// `top_n` best with `score ≥ threshold`.
///
/// Ordering is by logit descending, then by `(u, v)`.
pub fn predict_watchlist(
    model: &ScorerModel,
    g: &PropertyGraph,
    watchlist: &[NodeId],
    threshold: f64,
    top_n: usize,
) -> Result<Vec<LinkPrediction>, PredictorError> {
    let members = watchlist
        .iter()
        .map(|w| {
            g.index_of(w)
                .ok_or_else(|| PredictorError::UnknownWatchlistNode(w.clone()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if members.is_empty() {
        return Ok(Vec::new());
    }
    let positions = model.positions(g)?;
    let encoder = PositionEncoder::new(g, &positions);
    let listed: HashSet<usize> = members.iter().copied().collect();
    let mut seen = HashSet::new();
    let mut scored = Vec::new();
    for &w in &members {
        if !seen.insert(w) {
            continue;
        }
        for v in 0..g.node_count() {
            if listed.contains(&v) || g.is_adjacent(w, v) {
                continue;
            }
            let logit = model.logit(&encoder.encode(w, v))?;
            let score = super::sigmoid(logit);
            if score >= threshold {
                scored.push((logit, w, v, score));
            }
        }
    }
    scored.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .unwrap_or(Ordering::Equal)
            .then_with(|| g.node(a.1).id.cmp(&g.node(b.1).id))
            .then_with(|| g.node(a.2).id.cmp(&g.node(b.2).id))
    });
    scored.truncate(top_n);
    Ok(scored
        .into_iter()
        .map(|(_, w, v, score)| LinkPrediction {
            u: g.node(w).id.clone(),
            v: g.node(v).id.clone(),
            score,
            threshold,
            decision: true,
            model_seed: model.seed,
        })
        .collect())
}
