use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{PositionFeatures, PredictorError};
use crate::graph::{AttrMap, NodeId, PropertyGraph};

/// Encoded node pair fed to the scorer head.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PairFeatures(pub Vec<f64>);

impl PairFeatures {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Jaccard similarity of two attribute maps viewed as key–value sets.
/// Two empty maps have similarity 0.
pub fn attribute_jaccard(a: &AttrMap, b: &AttrMap) -> f64 {
    let set = |m: &AttrMap| -> BTreeSet<(String, String)> {
        m.iter().map(|(k, v)| (k.clone(), v.canonical())).collect()
    };
    let (sa, sb) = (set(a), set(b));
    let union = sa.union(&sb).count();
    if union == 0 {
        return 0.0;
    }
    sa.intersection(&sb).count() as f64 / union as f64
}

/// Turns a node pair (by graph index) into a fixed-width feature vector.
pub trait PairEncoder {
    fn dim(&self) -> usize;
    fn encode(&self, u: usize, v: usize) -> PairFeatures;
    fn graph(&self) -> &PropertyGraph;

    fn encode_ids(&self, u: &NodeId, v: &NodeId) -> Result<PairFeatures, PredictorError> {
        let g = self.graph();
        Ok(self.encode(g.require(u)?, g.require(v)?))
    }
}

/// `[f(u)⊙f(v)] ++ [|f(u)−f(v)|] ++ [jaccard] ++ [1.0]`, width `2k + 2`.
pub struct PositionEncoder<'a> {
    graph: &'a PropertyGraph,
    positions: &'a PositionFeatures,
    width: usize,
}

impl<'a> PositionEncoder<'a> {
    pub fn new(graph: &'a PropertyGraph, positions: &'a PositionFeatures) -> Self {
        assert_eq!(graph.node_count(), positions.node_count());
        PositionEncoder {
            graph,
            positions,
            width: positions.width(),
        }
    }
}

impl PairEncoder for PositionEncoder<'_> {
    fn dim(&self) -> usize {
        2 * self.width + 2
    }

    fn graph(&self) -> &PropertyGraph {
        self.graph
    }

    fn encode(&self, u: usize, v: usize) -> PairFeatures {
        let (fu, fv) = (self.positions.row(u), self.positions.row(v));
        let k = self.width;
        let mut x = vec![0.0; 2 * k + 2];
        for (i, (a, b)) in fu.iter().zip(fv).enumerate() {
            x[i] = a * b;
            x[k + i] = (a - b).abs();
        }
        x[2 * k] = attribute_jaccard(
            &self.graph.node(u).attributes,
            &self.graph.node(v).attributes,
        );
        x[2 * k + 1] = 1.0;
        PairFeatures(x)
    }
}

/// Degree-only baseline: `[d_u·d_v / D², |d_u − d_v| / D, 1.0]` with `D` the
/// maximum degree.
pub struct DegreeEncoder<'a> {
    graph: &'a PropertyGraph,
    max_degree: f64,
}

impl<'a> DegreeEncoder<'a> {
    pub fn new(graph: &'a PropertyGraph) -> Self {
        let max_degree = (0..graph.node_count())
            .map(|i| graph.degree(i))
            .max()
            .unwrap_or(0)
            .max(1) as f64;
        DegreeEncoder { graph, max_degree }
    }
}

impl PairEncoder for DegreeEncoder<'_> {
    fn dim(&self) -> usize {
        3
    }

    fn graph(&self) -> &PropertyGraph {
        self.graph
    }

    fn encode(&self, u: usize, v: usize) -> PairFeatures {
        let du = self.graph.degree(u) as f64;
        let dv = self.graph.degree(v) as f64;
        let m = self.max_degree;
        PairFeatures(vec![du * dv / (m * m), (du - dv).abs() / m, 1.0])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{bfs_distances, AttrValue, Edge, Label, Node};
    use crate::predictor::{position_features, AnchorSet};

    #[test]
    fn jaccard_of_attribute_sets() {
        let a = Node::new("a", Label::Person)
            .with_attr("city", AttrValue::Text("Pune".into()))
            .with_attr("age", AttrValue::Int(30));
        let b = Node::new("b", Label::Person)
            .with_attr("city", AttrValue::Text("Pune".into()))
            .with_attr("age", AttrValue::Float(31.0));
        assert_eq!(attribute_jaccard(&a.attributes, &b.attributes), 1.0 / 3.0);
        assert_eq!(attribute_jaccard(&a.attributes, &a.attributes), 1.0);
        assert_eq!(attribute_jaccard(&AttrMap::new(), &AttrMap::new()), 0.0);
        let c = Node::new("c", Label::Person).with_attr("age", AttrValue::Float(30.0));
        assert_eq!(attribute_jaccard(&a.attributes, &c.attributes), 0.5);
    }

    #[test]
    fn position_pair_layout() {
        let nodes = vec![
            Node::new("a", Label::Person),
            Node::new("b", Label::Person),
            Node::new("c", Label::Person),
        ];
        let edges = vec![Edge::new("a", "b", "knows"), Edge::new("b", "c", "knows")];
        let g = PropertyGraph::build(nodes, edges).unwrap().0;
        let anchors = AnchorSet {
            anchors: vec!["a".into()],
            seed: 0,
        };
        let table = bfs_distances(&g, &anchors.anchors, 6).unwrap();
        let pos = position_features(&g, &anchors, &table).unwrap();
        let enc = PositionEncoder::new(&g, &pos);
        assert_eq!(enc.dim(), 4);
        let x = enc.encode(0, 2);
        let want = [1.0 / 3.0, 2.0 / 3.0, 0.0, 1.0];
        for (got, want) in x.0.iter().zip(want) {
            assert!((got - want).abs() < 1e-15);
        }
    }
}
