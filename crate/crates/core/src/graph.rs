//! Property graphs of people, organizations and locations.
//!
//! A [`PropertyGraph`] is immutable once built. Edges keep the direction they
//! were written with and their `relation_type`, but connectivity, distances and
//! path enumeration treat them as undirected.

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};
use std::fmt;
use std::io::BufRead;

use serde::de::{MapAccess, Visitor};
use serde::{Deserialize, Deserializer, Serialize};
use thiserror::Error;

/// Hop cutoff used when callers do not pick one.
pub const DEFAULT_CUTOFF: u32 = 6;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(String);

impl NodeId {
    pub fn new(id: impl Into<String>) -> Self {
        NodeId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for NodeId {
    fn from(s: &str) -> Self {
        NodeId(s.to_string())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    Person,
    Organization,
    Location,
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Label::Person => "Person",
            Label::Organization => "Organization",
            Label::Location => "Location",
        };
        f.write_str(s)
    }
}

/// Scalar attribute or edge-property value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AttrValue {
    Bool(bool),
    Int(i64),
    Float(f64),
    Text(String),
}

impl AttrValue {
    /// Type-tagged text form; two values are equal attributes iff their
    /// canonical forms match.
    pub fn canonical(&self) -> String {
        match self {
            AttrValue::Bool(b) => format!("b:{b}"),
            AttrValue::Int(i) => format!("n:{i}"),
            AttrValue::Float(x) if x.fract() == 0.0 && x.abs() < 9.0e15 => {
                format!("n:{}", *x as i64)
            }
            AttrValue::Float(x) => format!("n:{x}"),
            AttrValue::Text(s) => format!("s:{s}"),
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            AttrValue::Text(s) => Some(s),
            _ => None,
        }
    }
}

impl fmt::Display for AttrValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AttrValue::Bool(b) => write!(f, "{b}"),
            AttrValue::Int(i) => write!(f, "{i}"),
            AttrValue::Float(x) => write!(f, "{x}"),
            AttrValue::Text(s) => f.write_str(s),
        }
    }
}

pub type AttrMap = BTreeMap<String, AttrValue>;

/// Rejects duplicate and empty keys instead of letting the last one win.
fn strict_attr_map<'de, D>(deserializer: D) -> Result<AttrMap, D::Error>
where
    D: Deserializer<'de>,
{
    struct StrictMap;

    impl<'de> Visitor<'de> for StrictMap {
        type Value = AttrMap;

        fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            f.write_str("a map of scalar attributes")
        }

        fn visit_map<A: MapAccess<'de>>(self, mut access: A) -> Result<AttrMap, A::Error> {
            let mut out = AttrMap::new();
            while let Some((key, value)) = access.next_entry::<String, AttrValue>()? {
                if key.is_empty() {
                    return Err(serde::de::Error::custom("empty attribute name"));
                }
                if out.contains_key(&key) {
                    return Err(serde::de::Error::custom(format!(
                        "duplicate attribute name `{key}`"
                    )));
                }
                out.insert(key, value);
            }
            Ok(out)
        }
    }

    deserializer.deserialize_map(StrictMap)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    pub label: Label,
    #[serde(default, deserialize_with = "strict_attr_map")]
    pub attributes: AttrMap,
}

impl Node {
    pub fn new(id: impl Into<String>, label: Label) -> Self {
        Node {
            id: NodeId::new(id),
            label,
            attributes: AttrMap::new(),
        }
    }

    pub fn with_attr(mut self, key: &str, value: AttrValue) -> Self {
        self.attributes.insert(key.to_string(), value);
        self
    }

    /// Human-readable name: the `name` attribute when present, else the id.
    pub fn display_name(&self) -> &str {
        self.attributes
            .get("name")
            .and_then(AttrValue::as_text)
            .unwrap_or(self.id.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub source: NodeId,
    pub target: NodeId,
    pub relation_type: String,
    #[serde(default, deserialize_with = "strict_attr_map")]
    pub properties: AttrMap,
}

impl Edge {
    pub fn new(source: &str, target: &str, relation_type: &str) -> Self {
        Edge {
            source: NodeId::from(source),
            target: NodeId::from(target),
            relation_type: relation_type.to_string(),
            properties: AttrMap::new(),
        }
    }
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-[{}]-{}", self.source, self.relation_type, self.target)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RecordKind {
    Node,
    Edge,
}

impl fmt::Display for RecordKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RecordKind::Node => f.write_str("node"),
            RecordKind::Edge => f.write_str("edge"),
        }
    }
}

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("edge {0} references an unknown node")]
    DanglingEdge(Box<Edge>),
    #[error("edge {0} is a self loop")]
    SelfLoop(Box<Edge>),
    #[error("malformed {kind} record at line {line}: {reason}")]
    MalformedRecord {
        kind: RecordKind,
        line: usize,
        reason: String,
    },
    #[error("duplicate node id `{0}`")]
    DuplicateNode(NodeId),
    #[error("unknown node `{0}`")]
    UnknownNode(NodeId),
    #[error("cutoff must be positive")]
    ZeroCutoff,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Counts reported by [`load_graph`] and [`PropertyGraph::build`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadReport {
    pub nodes: usize,
    pub edges: usize,
    pub dropped: usize,
}

/// One adjacency entry: the neighbor and the edge that reaches it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Incidence {
    pub neighbor: usize,
    pub edge: usize,
}

#[derive(Clone, Debug)]
pub struct PropertyGraph {
    nodes: Vec<Node>,
    index: HashMap<NodeId, usize>,
    edges: Vec<Edge>,
    endpoints: Vec<(usize, usize)>,
    adjacency: Vec<Vec<Incidence>>,
    neighbors: Vec<Vec<usize>>,
}

impl PropertyGraph {
    /// Validate and assemble a graph. Duplicate edges (same unordered
    /// endpoints and relation type) are collapsed to the first occurrence.
    pub fn build(nodes: Vec<Node>, edges: Vec<Edge>) -> Result<(Self, LoadReport), GraphError> {
        let mut index = HashMap::with_capacity(nodes.len());
        for (i, node) in nodes.iter().enumerate() {
            if index.insert(node.id.clone(), i).is_some() {
                return Err(GraphError::DuplicateNode(node.id.clone()));
            }
        }
        let mut seen = HashSet::new();
        let mut kept = Vec::with_capacity(edges.len());
        let mut endpoints = Vec::with_capacity(edges.len());
        let mut dropped = 0;
        for edge in edges {
            let (Some(&s), Some(&t)) = (index.get(&edge.source), index.get(&edge.target)) else {
                return Err(GraphError::DanglingEdge(Box::new(edge)));
            };
            if s == t {
                return Err(GraphError::SelfLoop(Box::new(edge)));
            }
            let key = (s.min(t), s.max(t), edge.relation_type.clone());
            if !seen.insert(key) {
                dropped += 1;
                continue;
            }
            endpoints.push((s, t));
            kept.push(edge);
        }
        let adjacency = build_adjacency(nodes.len(), &endpoints);
        let neighbors = adjacency
            .iter()
            .map(|inc| {
                let mut n: Vec<usize> = inc.iter().map(|i| i.neighbor).collect();
                n.dedup();
                n
            })
            .collect();
        let report = LoadReport {
            nodes: nodes.len(),
            edges: kept.len(),
            dropped,
        };
        Ok((
            PropertyGraph {
                nodes,
                index,
                edges: kept,
                endpoints,
                adjacency,
                neighbors,
            },
            report,
        ))
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn node(&self, idx: usize) -> &Node {
        &self.nodes[idx]
    }

    pub fn edge(&self, idx: usize) -> &Edge {
        &self.edges[idx]
    }

    /// Node indices of an edge, in written order.
    pub fn edge_endpoints(&self, idx: usize) -> (usize, usize) {
        self.endpoints[idx]
    }

    pub fn index_of(&self, id: &NodeId) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn require(&self, id: &NodeId) -> Result<usize, GraphError> {
        self.index_of(id)
            .ok_or_else(|| GraphError::UnknownNode(id.clone()))
    }

    pub fn contains(&self, id: &NodeId) -> bool {
        self.index.contains_key(id)
    }

    /// Incident edges of a node, sorted by (neighbor, edge).
    pub fn incidences(&self, idx: usize) -> &[Incidence] {
        &self.adjacency[idx]
    }

    /// Distinct neighbors of a node, sorted by index.
    pub fn neighbors(&self, idx: usize) -> &[usize] {
        &self.neighbors[idx]
    }

    pub fn degree(&self, idx: usize) -> usize {
        self.neighbors[idx].len()
    }

    pub fn is_adjacent(&self, a: usize, b: usize) -> bool {
        self.neighbors[a].binary_search(&b).is_ok()
    }

    /// Neighbor ids of a node as a sorted list.
    pub fn neighbor_ids(&self, id: &NodeId) -> Result<Vec<NodeId>, GraphError> {
        let idx = self.require(id)?;
        let mut ids: Vec<NodeId> = self.neighbors[idx]
            .iter()
            .map(|&n| self.nodes[n].id.clone())
            .collect();
        ids.sort();
        Ok(ids)
    }

    /// Distinct labels present in the graph.
    pub fn labels(&self) -> Vec<Label> {
        let mut labels: Vec<Label> = self.nodes.iter().map(|n| n.label).collect();
        labels.sort();
        labels.dedup();
        labels
    }

    /// Recompute the adjacency index from the edge list alone.
    pub fn rebuild_adjacency(&self) -> Vec<Vec<Incidence>> {
        let endpoints: Vec<(usize, usize)> = self
            .edges
            .iter()
            .map(|e| (self.index[&e.source], self.index[&e.target]))
            .collect();
        build_adjacency(self.nodes.len(), &endpoints)
    }

    pub fn adjacency_consistent(&self) -> bool {
        self.rebuild_adjacency() == self.adjacency
    }

    /// Subgraph induced by the given node indices, keeping their order.
    pub fn induced(&self, members: &[usize]) -> PropertyGraph {
        let keep: HashSet<usize> = members.iter().copied().collect();
        let nodes = members.iter().map(|&i| self.nodes[i].clone()).collect();
        let edges = self
            .endpoints
            .iter()
            .zip(&self.edges)
            .filter(|((s, t), _)| keep.contains(s) && keep.contains(t))
            .map(|(_, e)| e.clone())
            .collect();
        PropertyGraph::build(nodes, edges)
            .expect("induced subgraph of a valid graph is valid")
            .0
    }

    /// Same nodes, with the listed edges removed.
    pub fn without_edges(&self, removed: &HashSet<usize>) -> PropertyGraph {
        let edges = self
            .edges
            .iter()
            .enumerate()
            .filter(|(i, _)| !removed.contains(i))
            .map(|(_, e)| e.clone())
            .collect();
        PropertyGraph::build(self.nodes.clone(), edges)
            .expect("edge removal keeps a valid graph valid")
            .0
    }

    /// Concatenate node-disjoint graphs.
    pub fn disjoint_union(parts: &[PropertyGraph]) -> Result<PropertyGraph, GraphError> {
        let nodes = parts.iter().flat_map(|g| g.nodes.iter().cloned()).collect();
        let edges = parts.iter().flat_map(|g| g.edges.iter().cloned()).collect();
        Ok(PropertyGraph::build(nodes, edges)?.0)
    }

    /// Index of the edge between `a` and `b` with the given relation, if any.
    pub fn find_edge(&self, a: usize, b: usize, relation: &str) -> Option<usize> {
        self.adjacency[a]
            .iter()
            .find(|inc| inc.neighbor == b && self.edges[inc.edge].relation_type == relation)
            .map(|inc| inc.edge)
    }
}

fn build_adjacency(n: usize, endpoints: &[(usize, usize)]) -> Vec<Vec<Incidence>> {
    let mut adjacency = vec![Vec::new(); n];
    for (edge, &(s, t)) in endpoints.iter().enumerate() {
        adjacency[s].push(Incidence { neighbor: t, edge });
        adjacency[t].push(Incidence { neighbor: s, edge });
    }
    for list in &mut adjacency {
        list.sort_unstable();
    }
    adjacency
}

/// Parse line-delimited node and edge records and build a graph.
///
/// Blank lines are skipped. Line numbers in errors are 1-based.
pub fn load_graph(
    node_records: impl BufRead,
    edge_records: impl BufRead,
) -> Result<(PropertyGraph, LoadReport), GraphError> {
    let nodes: Vec<(usize, Node)> = parse_records(node_records, RecordKind::Node)?;
    for (line, node) in &nodes {
        if node.id.as_str().is_empty() {
            return Err(GraphError::MalformedRecord {
                kind: RecordKind::Node,
                line: *line,
                reason: "empty node id".into(),
            });
        }
    }
    let edges: Vec<(usize, Edge)> = parse_records(edge_records, RecordKind::Edge)?;
    for (line, edge) in &edges {
        if edge.relation_type.is_empty() {
            return Err(GraphError::MalformedRecord {
                kind: RecordKind::Edge,
                line: *line,
                reason: "empty relation_type".into(),
            });
        }
    }
    PropertyGraph::build(
        nodes.into_iter().map(|(_, n)| n).collect(),
        edges.into_iter().map(|(_, e)| e).collect(),
    )
}

fn parse_records<T, R>(reader: R, kind: RecordKind) -> Result<Vec<(usize, T)>, GraphError>
where
    T: serde::de::DeserializeOwned,
    R: BufRead,
{
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|e| GraphError::MalformedRecord {
            kind,
            line: i + 1,
            reason: e.to_string(),
        })?;
        out.push((i + 1, record));
    }
    Ok(out)
}

/// Connected components that met the size threshold, plus what was dropped.
#[derive(Clone, Debug)]
pub struct Components {
    pub graphs: Vec<PropertyGraph>,
    pub filtered_components: usize,
    pub filtered_nodes: usize,
}

/// Split `g` into connected components and keep those with at least
/// `min_size` nodes. Components are ordered by their first node in `g`.
pub fn connected_components(g: &PropertyGraph, min_size: usize) -> Components {
    let membership = component_labels(g);
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (node, &c) in membership.iter().enumerate() {
        if c == groups.len() {
            groups.push(Vec::new());
        }
        groups[c].push(node);
    }
    let mut out = Components {
        graphs: Vec::new(),
        filtered_components: 0,
        filtered_nodes: 0,
    };
    for members in groups {
        if members.len() >= min_size {
            out.graphs.push(g.induced(&members));
        } else {
            out.filtered_components += 1;
            out.filtered_nodes += members.len();
        }
    }
    out
}

/// Component id per node; ids are assigned in order of first appearance.
pub fn component_labels(g: &PropertyGraph) -> Vec<usize> {
    let n = g.node_count();
    let mut label = vec![usize::MAX; n];
    let mut next = 0;
    let mut queue = VecDeque::new();
    for start in 0..n {
        if label[start] != usize::MAX {
            continue;
        }
        label[start] = next;
        queue.push_back(start);
        while let Some(u) = queue.pop_front() {
            for &v in g.neighbors(u) {
                if label[v] == usize::MAX {
                    label[v] = next;
                    queue.push_back(v);
                }
            }
        }
        next += 1;
    }
    label
}

/// Truncated hop distances from a set of sources.
///
/// `None` marks a node that is farther than `cutoff` hops or disconnected.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceTable {
    sources: Vec<NodeId>,
    cutoff: u32,
    rows: Vec<Vec<Option<u32>>>,
}

impl DistanceTable {
    pub fn sources(&self) -> &[NodeId] {
        &self.sources
    }

    pub fn cutoff(&self) -> u32 {
        self.cutoff
    }

    /// Row position of a source id.
    pub fn source_position(&self, id: &NodeId) -> Option<usize> {
        self.sources.iter().position(|s| s == id)
    }

    /// Distances from the `pos`-th source, indexed by node index.
    pub fn row(&self, pos: usize) -> &[Option<u32>] {
        &self.rows[pos]
    }

    pub fn get(&self, pos: usize, node: usize) -> Option<u32> {
        self.rows[pos][node]
    }
}

pub fn bfs_distances(
    g: &PropertyGraph,
    sources: &[NodeId],
    cutoff: u32,
) -> Result<DistanceTable, GraphError> {
    if cutoff == 0 {
        return Err(GraphError::ZeroCutoff);
    }
    let starts = sources
        .iter()
        .map(|s| g.require(s))
        .collect::<Result<Vec<_>, _>>()?;
    let rows = starts
        .iter()
        .map(|&s| bfs_from(g, s, cutoff))
        .collect();
    Ok(DistanceTable {
        sources: sources.to_vec(),
        cutoff,
        rows,
    })
}

/// Single-source truncated BFS by node index.
pub fn bfs_from(g: &PropertyGraph, source: usize, cutoff: u32) -> Vec<Option<u32>> {
    let mut dist = vec![None; g.node_count()];
    dist[source] = Some(0);
    let mut queue = VecDeque::from([source]);
    while let Some(u) = queue.pop_front() {
        let du = dist[u].expect("queued nodes have a distance");
        if du == cutoff {
            continue;
        }
        for &v in g.neighbors(u) {
            if dist[v].is_none() {
                dist[v] = Some(du + 1);
                queue.push_back(v);
            }
        }
    }
    dist
}

/// Nodes within `radius` hops of `center`, in BFS discovery order.
pub fn ball(g: &PropertyGraph, center: usize, radius: u32) -> Vec<usize> {
    let mut seen = vec![false; g.node_count()];
    let mut order = vec![center];
    seen[center] = true;
    let mut frontier = vec![center];
    for _ in 0..radius {
        let mut next = Vec::new();
        for &u in &frontier {
            for &v in g.neighbors(u) {
                if !seen[v] {
                    seen[v] = true;
                    next.push(v);
                }
            }
        }
        if next.is_empty() {
            break;
        }
        order.extend_from_slice(&next);
        frontier = next;
    }
    order
}
