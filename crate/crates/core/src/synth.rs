//! Seeded synthetic datasets: community-structured person graphs with
//! names, random attributes and a small news-style corpus.

use rand::seq::{index, IndexedRandom};
use rand::Rng;

use crate::explain::verify::Document;
use crate::graph::{AttrValue, Edge, Label, Node, NodeId, PropertyGraph};
use crate::rng::stage_rng;

const FIRST_NAMES: [&str; 24] = [
    "Ada", "Bruno", "Chiara", "Dmitri", "Elena", "Farid", "Greta", "Hugo", "Ines", "Jonas",
    "Keiko", "Lars", "Maya", "Nikhil", "Olga", "Pablo", "Quinn", "Rosa", "Sven", "Tara",
    "Umar", "Vera", "Wen", "Yusuf",
];

const LAST_NAMES: [&str; 24] = [
    "Abbott", "Brandt", "Castillo", "Dubois", "Eriksen", "Fontaine", "Gallo", "Hartmann",
    "Ibarra", "Jansen", "Kowalski", "Lindqvist", "Moreau", "Novak", "Okafor", "Petrov",
    "Quintero", "Rinaldi", "Sato", "Tanaka", "Ueda", "Varga", "Weber", "Zhou",
];

const CITIES: [&str; 6] = ["Lisbon", "Oslo", "Porto", "Graz", "Lyon", "Turin"];
const RELATIONS: [&str; 3] = ["knows", "colleague", "family"];
const VENUES: [&str; 5] = ["a trade fair", "a board meeting", "a charity gala", "a court hearing", "a press event"];

#[derive(Clone, Debug, PartialEq)]
pub struct CommunitySpec {
    pub sizes: Vec<usize>,
    pub p_in: f64,
    pub p_out: f64,
}

impl Default for CommunitySpec {
    fn default() -> Self {
        CommunitySpec {
            sizes: vec![60, 60],
            p_in: 0.15,
            p_out: 0.01,
        }
    }
}

#[derive(Clone, Debug)]
pub struct CommunityGraph {
    pub graph: PropertyGraph,
    /// Community of each node, by node index.
    pub community: Vec<usize>,
}

/// Planted-partition graph of people.
///
/// Every node gets a unique name and a city drawn uniformly at random, so
/// attributes carry no information about community membership. Relation
/// types are uniform over a small vocabulary.
pub fn community_graph(spec: &CommunitySpec, seed: u64) -> CommunityGraph {
    let mut rng = stage_rng(seed, "synth-community");
    let total: usize = spec.sizes.iter().sum();
    let names = unique_names(total, &mut rng);
    let mut community = Vec::with_capacity(total);
    let mut nodes = Vec::with_capacity(total);
    for (c, &size) in spec.sizes.iter().enumerate() {
        for _ in 0..size {
            let i = nodes.len();
            let city = *CITIES.choose(&mut rng).expect("non-empty");
            nodes.push(
                Node::new(format!("p{i:03}"), Label::Person)
                    .with_attr("name", AttrValue::Text(names[i].clone()))
                    .with_attr("city", AttrValue::Text(city.to_string())),
            );
            community.push(c);
        }
    }
    let mut edges = Vec::new();
    for a in 0..total {
        for b in a + 1..total {
            let p = if community[a] == community[b] {
                spec.p_in
            } else {
                spec.p_out
            };
            if rng.random_bool(p) {
                let rel = *RELATIONS.choose(&mut rng).expect("non-empty");
                edges.push(Edge::new(nodes[a].id.as_str(), nodes[b].id.as_str(), rel));
            }
        }
    }
    let (graph, _) = PropertyGraph::build(nodes, edges).expect("generated graph is valid");
    CommunityGraph { graph, community }
}

fn unique_names(n: usize, rng: &mut impl Rng) -> Vec<String> {
    let space = FIRST_NAMES.len() * LAST_NAMES.len();
    let picks = index::sample(rng, space, n.min(space)).into_vec();
    (0..n)
        .map(|i| {
            let k = picks[i % picks.len()];
            let base = format!("{} {}", FIRST_NAMES[k / LAST_NAMES.len()], LAST_NAMES[k % LAST_NAMES.len()]);
            if i < space {
                base
            } else {
                format!("{base} {}", i / space + 1)
            }
        })
        .collect()
}

/// Short documents about the people in `g`: co-mention stories for a
/// sample of edges, single-person profiles, and filler.
pub fn news_corpus(g: &PropertyGraph, docs: usize, seed: u64) -> Vec<Document> {
    let mut rng = stage_rng(seed, "synth-corpus");
    let n = g.node_count();
    let mut out = Vec::with_capacity(docs);
    for d in 0..docs {
        let doc_id = format!("doc{d:04}");
        let roll: f64 = rng.random();
        let venue = *VENUES.choose(&mut rng).expect("non-empty");
        let body = if roll < 0.5 && g.edge_count() > 0 {
            let e = g.edge(rng.random_range(0..g.edge_count()));
            let (a, b) = (name_of(g, &e.source), name_of(g, &e.target));
            format!("{a} and {b} were seen together at {venue}. Sources say {a} and {b} have met several times.")
        } else if roll < 0.8 && n > 0 {
            let a = name_of(g, &g.node(rng.random_range(0..n)).id);
            format!("{a} spoke at {venue} about regional logistics and later declined to comment.")
        } else {
            format!("Attendance at {venue} rose this year as regional firms expanded their hiring.")
        };
        out.push(Document {
            doc_id,
            title: format!("Report {d}"),
            body,
        });
    }
    out
}

fn name_of(g: &PropertyGraph, id: &NodeId) -> String {
    let idx = g.index_of(id).expect("id from graph");
    g.node(idx).display_name().to_string()
}
