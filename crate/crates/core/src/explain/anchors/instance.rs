use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::AnchorsError;
use crate::graph::{bfs_from, NodeId, PropertyGraph};
use crate::predictor::{PairEncoder, PositionEncoder, ScorerModel};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Bool,
    Count,
    /// Ordinal 1, 2, 3, 4 (meaning 4 or more), 5 (unreachable).
    DistanceBucket,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceBucket {
    One,
    Two,
    Three,
    FourPlus,
    Unreachable,
}

impl DistanceBucket {
    pub fn from_hops(hops: Option<u32>) -> Self {
        match hops {
            None => DistanceBucket::Unreachable,
            Some(0 | 1) => DistanceBucket::One,
            Some(2) => DistanceBucket::Two,
            Some(3) => DistanceBucket::Three,
            Some(_) => DistanceBucket::FourPlus,
        }
    }

    pub fn code(self) -> i64 {
        match self {
            DistanceBucket::One => 1,
            DistanceBucket::Two => 2,
            DistanceBucket::Three => 3,
            DistanceBucket::FourPlus => 4,
            DistanceBucket::Unreachable => 5,
        }
    }

    pub fn from_code(code: i64) -> Option<Self> {
        Some(match code {
            1 => DistanceBucket::One,
            2 => DistanceBucket::Two,
            3 => DistanceBucket::Three,
            4 => DistanceBucket::FourPlus,
            5 => DistanceBucket::Unreachable,
            _ => return None,
        })
    }
}

impl fmt::Display for DistanceBucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DistanceBucket::One => "1",
            DistanceBucket::Two => "2",
            DistanceBucket::Three => "3",
            DistanceBucket::FourPlus => "4+",
            DistanceBucket::Unreachable => "unreachable",
        })
    }
}

/// Ordered feature names and kinds shared by instances, the surrogate and
/// anchor rules.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    names: Vec<String>,
    kinds: Vec<FeatureKind>,
}

impl FeatureSchema {
    pub fn new(features: Vec<(String, FeatureKind)>) -> Self {
        let (names, kinds) = features.into_iter().unzip();
        FeatureSchema { names, kinds }
    }

    /// `same_attribute[k]` for each key, then the structural features.
    pub fn for_attributes(keys: &BTreeSet<String>) -> Self {
        let mut features: Vec<(String, FeatureKind)> = keys
            .iter()
            .map(|k| (format!("same_attribute[{k}]"), FeatureKind::Bool))
            .collect();
        features.push(("degree_u".into(), FeatureKind::Count));
        features.push(("degree_v".into(), FeatureKind::Count));
        features.push(("common_neighbors".into(), FeatureKind::Count));
        features.push(("distance_bucket".into(), FeatureKind::DistanceBucket));
        FeatureSchema::new(features)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn kind(&self, i: usize) -> FeatureKind {
        self.kinds[i]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Human-readable value of feature `i`.
    pub fn render_value(&self, i: usize, value: i64) -> String {
        match self.kinds[i] {
            FeatureKind::Bool => (value != 0).to_string(),
            FeatureKind::Count => value.to_string(),
            FeatureKind::DistanceBucket => DistanceBucket::from_code(value)
                .map(|b| b.to_string())
                .unwrap_or_else(|| value.to_string()),
        }
    }
}

/// Feature values of one node pair, in schema order. Booleans are 0/1 and
/// the distance bucket uses [`DistanceBucket::code`].
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct InterpretableInstance {
    pub u: NodeId,
    pub v: NodeId,
    pub values: Vec<i64>,
}

impl InterpretableInstance {
    pub fn named(&self, schema: &FeatureSchema) -> BTreeMap<String, String> {
        self.values
            .iter()
            .enumerate()
            .map(|(i, &v)| (schema.name(i).to_string(), schema.render_value(i, v)))
            .collect()
    }
}

/// Attribute keys present on any node, sorted.
pub fn attribute_keys(g: &PropertyGraph) -> BTreeSet<String> {
    g.nodes()
        .iter()
        .flat_map(|n| n.attributes.keys().cloned())
        .collect()
}

/// Compute the interpretable features of each pair against `g`.
pub fn describe_pairs(
    g: &PropertyGraph,
    schema: &FeatureSchema,
    keys: &BTreeSet<String>,
    pairs: &[(NodeId, NodeId)],
) -> Result<Vec<InterpretableInstance>, AnchorsError> {
    let mut bfs_cache: HashMap<usize, Vec<Option<u32>>> = HashMap::new();
    let horizon = u32::try_from(g.node_count()).unwrap_or(u32::MAX).max(1);
    pairs
        .iter()
        .map(|(u, v)| {
            let (Some(a), Some(b)) = (g.index_of(u), g.index_of(v)) else {
                return Err(AnchorsError::UnknownPair(u.clone(), v.clone()));
            };
            let (na, nb) = (g.node(a), g.node(b));
            let mut values: Vec<i64> = keys
                .iter()
                .map(|k| match (na.attributes.get(k), nb.attributes.get(k)) {
                    (Some(x), Some(y)) => i64::from(x.canonical() == y.canonical()),
                    _ => 0,
                })
                .collect();
            let common = sorted_intersection(g.neighbors(a), g.neighbors(b));
            let dist = bfs_cache
                .entry(a)
                .or_insert_with(|| bfs_from(g, a, horizon))[b];
            values.push(g.degree(a) as i64);
            values.push(g.degree(b) as i64);
            values.push(common as i64);
            values.push(DistanceBucket::from_hops(dist).code());
            debug_assert_eq!(values.len(), schema.len());
            Ok(InterpretableInstance {
                u: u.clone(),
                v: v.clone(),
                values,
            })
        })
        .collect()
}

fn sorted_intersection(a: &[usize], b: &[usize]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

/// Interpretable instances labelled with the predictor's thresholded decision.
pub fn build_instances(
    g: &PropertyGraph,
    model: &ScorerModel,
    pairs: &[(NodeId, NodeId)],
    threshold: f64,
) -> Result<(FeatureSchema, Vec<(InterpretableInstance, bool)>), AnchorsError> {
    let keys = attribute_keys(g);
    let schema = FeatureSchema::for_attributes(&keys);
    let instances = describe_pairs(g, &schema, &keys, pairs)?;
    let positions = model.positions(g)?;
    let encoder = PositionEncoder::new(g, &positions);
    let labelled = instances
        .into_iter()
        .map(|inst| {
            let x = encoder.encode_ids(&inst.u, &inst.v)?;
            let decision = model.score(&x)? >= threshold;
            Ok((inst, decision))
        })
        .collect::<Result<Vec<_>, AnchorsError>>()?;
    Ok((schema, labelled))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{AttrValue, Edge, Label, Node};

    fn fixture() -> PropertyGraph {
        let city = |c: &str| AttrValue::Text(c.into());
        let nodes = vec![
            Node::new("a", Label::Person).with_attr("city", city("Pune")),
            Node::new("b", Label::Person).with_attr("city", city("Pune")),
            Node::new("x", Label::Person),
            Node::new("y", Label::Person),
            Node::new("z", Label::Person),
            Node::new("far", Label::Person).with_attr("city", city("Goa")),
            Node::new("iso", Label::Person),
        ];
        let edges = vec![
            Edge::new("a", "b", "knows"),
            Edge::new("a", "x", "knows"),
            Edge::new("a", "y", "knows"),
            Edge::new("a", "z", "knows"),
            Edge::new("b", "x", "knows"),
            Edge::new("b", "y", "knows"),
            Edge::new("b", "z", "knows"),
            Edge::new("z", "far", "knows"),
        ];
        PropertyGraph::build(nodes, edges).unwrap().0
    }

    #[test]
    fn counts_common_neighbors_and_distance() {
        let g = fixture();
        let keys = attribute_keys(&g);
        let schema = FeatureSchema::for_attributes(&keys);
        let pairs = vec![
            ("a".into(), "b".into()),
            ("a".into(), "iso".into()),
            ("x".into(), "far".into()),
            ("a".into(), "far".into()),
        ];
        let inst = describe_pairs(&g, &schema, &keys, &pairs).unwrap();
        let named = inst[0].named(&schema);
        assert_eq!(named["common_neighbors"], "3");
        assert_eq!(named["distance_bucket"], "1");
        assert_eq!(named["same_attribute[city]"], "true");
        assert_eq!(named["degree_u"], "4");
        assert_eq!(inst[1].named(&schema)["distance_bucket"], "unreachable");
        assert_eq!(inst[2].named(&schema)["distance_bucket"], "3");
        assert_eq!(inst[3].named(&schema)["same_attribute[city]"], "false");
    }

    #[test]
    fn unknown_pair() {
        let g = fixture();
        let keys = attribute_keys(&g);
        let schema = FeatureSchema::for_attributes(&keys);
        let err = describe_pairs(&g, &schema, &keys, &[("a".into(), "nope".into())]);
        assert!(matches!(err, Err(AnchorsError::UnknownPair(_, _))));
    }

    #[test]
    fn bucket_codes_roundtrip() {
        for hops in [None, Some(1), Some(2), Some(3), Some(4), Some(9)] {
            let b = DistanceBucket::from_hops(hops);
            assert_eq!(DistanceBucket::from_code(b.code()), Some(b));
        }
        assert_eq!(DistanceBucket::from_hops(Some(7)).to_string(), "4+");
    }
}
