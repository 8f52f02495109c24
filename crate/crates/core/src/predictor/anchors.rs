use rand::seq::index;
use serde::{Deserialize, Serialize};

use super::PredictorError;
use crate::graph::{DistanceTable, NodeId, PropertyGraph};
use crate::rng::stage_rng;

pub const DEFAULT_ANCHORS: usize = 64;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnchorSet {
    pub anchors: Vec<NodeId>,
    pub seed: u64,
}

impl AnchorSet {
    pub fn len(&self) -> usize {
        self.anchors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.anchors.is_empty()
    }
}

/// Draw `min(k, |V|)` distinct anchors uniformly without replacement.
pub fn select_anchors(g: &PropertyGraph, k: usize, seed: u64) -> Result<AnchorSet, PredictorError> {
    if g.is_empty() {
        return Err(PredictorError::EmptyGraph);
    }
    let n = g.node_count();
    let mut rng = stage_rng(seed, "anchors");
    let picked = index::sample(&mut rng, n, k.min(n));
    Ok(AnchorSet {
        anchors: picked.iter().map(|i| g.node(i).id.clone()).collect(),
        seed,
    })
}

/// Per-node vectors `f_i(v) = 1 / (d(v, anchor_i) + 1)`, zero when the anchor
/// is out of reach.
#[derive(Clone, Debug, PartialEq)]
pub struct PositionFeatures {
    anchors: Vec<NodeId>,
    rows: Vec<Vec<f64>>,
}

impl PositionFeatures {
    pub fn width(&self) -> usize {
        self.anchors.len()
    }

    pub fn anchors(&self) -> &[NodeId] {
        &self.anchors
    }

    /// Feature row by node index of the graph the features were built on.
    pub fn row(&self, node: usize) -> &[f64] {
        &self.rows[node]
    }

    pub fn node_count(&self) -> usize {
        self.rows.len()
    }
}

pub fn position_features(
    g: &PropertyGraph,
    anchors: &AnchorSet,
    table: &DistanceTable,
) -> Result<PositionFeatures, PredictorError> {
    let positions = anchors
        .anchors
        .iter()
        .map(|a| {
            table
                .source_position(a)
                .ok_or_else(|| PredictorError::AnchorMissingFromTable(a.clone()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let rows = (0..g.node_count())
        .map(|v| {
            positions
                .iter()
                .map(|&p| match table.get(p, v) {
                    Some(d) => 1.0 / (f64::from(d) + 1.0),
                    None => 0.0,
                })
                .collect()
        })
        .collect();
    Ok(PositionFeatures {
        anchors: anchors.anchors.clone(),
        rows,
    })
}
