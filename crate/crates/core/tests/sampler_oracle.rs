use std::collections::HashSet;

use rand::Rng;

use lpx_core::graph::{Edge, Label, Node, PropertyGraph};
use lpx_core::rng::stage_rng;
use lpx_core::sampler::{sample_negatives, split_positives, split_with_negatives, LinkSample};

fn random_graph(n: usize, m: usize, seed: u64) -> PropertyGraph {
    let mut rng = stage_rng(seed, "sampler-fixture");
    let nodes = (0..n).map(|i| Node::new(format!("n{i:03}"), Label::Person)).collect();
    let rel = ["knows", "colleague", "family"];
    let mut edges = Vec::new();
    let mut seen = HashSet::new();
    while edges.len() < m {
        let (a, b) = (rng.random_range(0..n), rng.random_range(0..n));
        let r = rel[rng.random_range(0..3)];
        if a != b && seen.insert((a.min(b), a.max(b), r)) {
            edges.push(Edge::new(&format!("n{a:03}"), &format!("n{b:03}"), r));
        }
    }
    PropertyGraph::build(nodes, edges).unwrap().0
}

/// Reference selection: hash every edge key with a seeded FNV-1a/SplitMix64
/// and take the lowest ⌈ratio·|E|⌉.
fn reference_selection(g: &PropertyGraph, ratio: f64, seed: u64) -> HashSet<(String, String, String)> {
    fn fnv(bytes: &[u8]) -> u64 {
        bytes.iter().fold(0xcbf29ce484222325u64, |h, &b| {
            (h ^ u64::from(b)).wrapping_mul(0x100000001b3)
        })
    }
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9e3779b97f4a7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }
    let mut keyed: Vec<(u64, (String, String, String))> = g
        .edges()
        .iter()
        .map(|e| {
            let (s, t) = (e.source.to_string(), e.target.to_string());
            let (a, b) = if s <= t { (s, t) } else { (t, s) };
            let key = format!("{a}\u{1f}{b}\u{1f}{}", e.relation_type);
            (mix(seed ^ fnv(key.as_bytes())), (a, b, e.relation_type.clone()))
        })
        .collect();
    keyed.sort();
    let take = (g.edge_count() as f64 * ratio).round() as usize;
    keyed.into_iter().take(take).map(|(_, k)| k).collect()
}

#[test]
fn selection_matches_hash_oracle_on_thousand_edges() {
    let g = random_graph(200, 1000, 3);
    for seed in [0, 7, 42] {
        let split = split_positives(&g, 0.10, seed).unwrap();
        assert_eq!(split.positives.len(), 100);
        assert_eq!(split.training_graph.edge_count(), 900);
        let want = reference_selection(&g, 0.10, seed);
        let chosen: HashSet<(String, String, String)> = g
            .edges()
            .iter()
            .filter(|e| {
                // An edge is held out iff it is missing from the training graph.
                let (s, t) = (
                    split.training_graph.index_of(&e.source).unwrap(),
                    split.training_graph.index_of(&e.target).unwrap(),
                );
                split.training_graph.find_edge(s, t, &e.relation_type).is_none()
            })
            .map(|e| {
                let (s, t) = (e.source.to_string(), e.target.to_string());
                let (a, b) = if s <= t { (s, t) } else { (t, s) };
                (a, b, e.relation_type.clone())
            })
            .collect();
        assert_eq!(chosen, want, "seed {seed}");
    }
}

#[test]
fn twenty_edges_hold_out_two() {
    let g = random_graph(12, 20, 1);
    let split = split_positives(&g, 0.10, 7).unwrap();
    assert_eq!(split.positives.len(), 2);
    assert_eq!(split.training_graph.edge_count(), 18);
    assert_eq!(split_positives(&g, 0.10, 7).unwrap().positives, split.positives);
}

#[test]
fn positives_and_training_edges_partition_the_graph() {
    use std::collections::HashMap;
    let pair = |a: &str, b: &str| if a <= b { (a.to_string(), b.to_string()) } else { (b.to_string(), a.to_string()) };
    for seed in 0..20 {
        let g = random_graph(60, 150, seed);
        let split = split_with_negatives(&g, 0.10, seed).unwrap();
        // Edges per unordered pair; a pair may carry several relations.
        let mut count: HashMap<(String, String), i64> = HashMap::new();
        for e in g.edges() {
            *count.entry(pair(e.source.as_str(), e.target.as_str())).or_default() += 1;
        }
        for e in split.training_graph.edges() {
            *count.entry(pair(e.source.as_str(), e.target.as_str())).or_default() -= 1;
        }
        for p in &split.positives {
            *count.entry(pair(p.u.as_str(), p.v.as_str())).or_default() -= 1;
        }
        assert!(count.values().all(|&c| c == 0), "seed {seed}");
        assert_eq!(split.positives.len() + split.training_graph.edge_count(), g.edge_count());
    }
}

#[test]
fn negatives_never_touch_original_edges() {
    let g = random_graph(200, 900, 11);
    let split = split_positives(&g, 0.10, 5).unwrap();
    let negatives = sample_negatives(&g, &split.positives, 5).unwrap();
    assert_eq!(negatives.len(), split.positives.len());
    let edges: HashSet<(String, String)> = g
        .edges()
        .iter()
        .flat_map(|e| {
            let (a, b) = (e.source.to_string(), e.target.to_string());
            [(a.clone(), b.clone()), (b, a)]
        })
        .collect();
    for (neg, pos) in negatives.iter().zip(&split.positives) {
        assert_ne!(neg.u, neg.v);
        assert!(!edges.contains(&(neg.u.to_string(), neg.v.to_string())));
        // The kept endpoint comes from the positive it was drawn for.
        assert!(neg.u == pos.u || neg.u == pos.v);
    }
}

#[test]
fn only_unconnected_candidate_is_chosen() {
    let nodes = ["A", "B", "C", "D"].iter().map(|i| Node::new(*i, Label::Person)).collect();
    let edges = vec![
        Edge::new("A", "B", "knows"),
        Edge::new("B", "C", "knows"),
        Edge::new("A", "C", "knows"),
    ];
    let g = PropertyGraph::build(nodes, edges).unwrap().0;
    let pos = vec![LinkSample {
        u: "A".into(),
        v: "B".into(),
        label: lpx_core::sampler::SampleLabel::Positive,
        origin: lpx_core::sampler::SampleOrigin::HeldOutEdge,
    }];
    for seed in 0..10 {
        let neg = sample_negatives(&g, &pos, seed).unwrap();
        assert_eq!(neg[0].v.as_str(), "D");
    }
}
