#![allow(clippy::needless_range_loop)]

use std::collections::HashSet;

use proptest::prelude::*;

use lpx_core::graph::{
    ball, bfs_distances, component_labels, connected_components, Edge, Label, Node, NodeId,
    PropertyGraph,
};

fn build(n: usize, pairs: &[(usize, usize, u8)]) -> PropertyGraph {
    let nodes = (0..n).map(|i| Node::new(format!("v{i}"), Label::Person)).collect();
    let rel = ["knows", "colleague", "family"];
    let edges = pairs
        .iter()
        .filter(|(a, b, _)| a != b)
        .map(|&(a, b, r)| Edge::new(&format!("v{a}"), &format!("v{b}"), rel[r as usize % 3]))
        .collect();
    PropertyGraph::build(nodes, edges).unwrap().0
}

fn graphs(max_nodes: usize) -> impl Strategy<Value = PropertyGraph> {
    (2..=max_nodes).prop_flat_map(|n| {
        prop::collection::vec((0..n, 0..n, 0u8..3), 0..n * 2).prop_map(move |p| build(n, &p))
    })
}

/// All-pairs hop counts by Floyd–Warshall; `u32::MAX` when disconnected.
fn floyd_warshall(g: &PropertyGraph) -> Vec<Vec<u32>> {
    let n = g.node_count();
    let mut d = vec![vec![u32::MAX; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0;
    }
    for e in 0..g.edge_count() {
        let (a, b) = g.edge_endpoints(e);
        d[a][b] = 1;
        d[b][a] = 1;
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let via = d[i][k].saturating_add(d[k][j]);
                if via < d[i][j] {
                    d[i][j] = via;
                }
            }
        }
    }
    d
}

proptest! {
    #[test]
    fn adjacency_rebuild_is_identical(g in graphs(30)) {
        prop_assert!(g.adjacency_consistent());
        prop_assert_eq!(g.rebuild_adjacency(), g.rebuild_adjacency());
    }

    #[test]
    fn bfs_matches_floyd_warshall(g in graphs(20), cutoff in 1u32..8) {
        let fw = floyd_warshall(&g);
        let sources: Vec<NodeId> = g.nodes().iter().map(|n| n.id.clone()).collect();
        let table = bfs_distances(&g, &sources, cutoff).unwrap();
        for s in 0..g.node_count() {
            for v in 0..g.node_count() {
                let want = (fw[s][v] <= cutoff).then_some(fw[s][v]);
                prop_assert_eq!(table.get(s, v), want, "source {} node {}", s, v);
            }
        }
    }

    #[test]
    fn uncut_bfs_is_exact_and_symmetric(g in graphs(50)) {
        let n = g.node_count() as u32;
        let fw = floyd_warshall(&g);
        let sources: Vec<NodeId> = g.nodes().iter().map(|x| x.id.clone()).collect();
        let table = bfs_distances(&g, &sources, n.max(1)).unwrap();
        for s in 0..g.node_count() {
            prop_assert_eq!(table.get(s, s), Some(0));
            for v in 0..g.node_count() {
                prop_assert_eq!(table.get(s, v), table.get(v, s));
                prop_assert_eq!(table.get(s, v), (fw[s][v] != u32::MAX).then_some(fw[s][v]));
            }
        }
    }

    #[test]
    fn components_partition_qualifying_nodes(g in graphs(40), min_size in 1usize..6) {
        let labels = component_labels(&g);
        let comps = connected_components(&g, min_size);
        let mut seen: HashSet<NodeId> = HashSet::new();
        for c in &comps.graphs {
            prop_assert!(c.node_count() >= min_size);
            let first = g.index_of(&c.node(0).id).unwrap();
            for node in c.nodes() {
                prop_assert!(seen.insert(node.id.clone()), "node in two components");
                prop_assert_eq!(labels[g.index_of(&node.id).unwrap()], labels[first]);
            }
        }
        // Every node of a qualifying component is returned; the rest are counted.
        let mut size = vec![0usize; g.node_count()];
        for &l in &labels {
            size[l] += 1;
        }
        let qualifying = labels.iter().filter(|&&l| size[l] >= min_size).count();
        prop_assert_eq!(seen.len(), qualifying);
        prop_assert_eq!(comps.filtered_nodes, g.node_count() - qualifying);
        let kept_edges: usize = comps.graphs.iter().map(PropertyGraph::edge_count).sum();
        let expected_edges = (0..g.edge_count())
            .filter(|&e| size[labels[g.edge_endpoints(e).0]] >= min_size)
            .count();
        prop_assert_eq!(kept_edges, expected_edges);
    }

    #[test]
    fn ball_is_the_distance_neighbourhood(g in graphs(25), radius in 0u32..5) {
        let fw = floyd_warshall(&g);
        for c in 0..g.node_count() {
            let mut got = ball(&g, c, radius);
            got.sort_unstable();
            let want: Vec<usize> = (0..g.node_count()).filter(|&v| fw[c][v] <= radius).collect();
            prop_assert_eq!(got, want);
        }
    }

    #[test]
    fn induced_keeps_exactly_inner_edges(g in graphs(25), keep in prop::collection::vec(any::<bool>(), 25)) {
        let members: Vec<usize> = (0..g.node_count()).filter(|&i| keep[i]).collect();
        let sub = g.induced(&members);
        prop_assert_eq!(sub.node_count(), members.len());
        let inner = (0..g.edge_count())
            .filter(|&e| {
                let (a, b) = g.edge_endpoints(e);
                keep[a] && keep[b]
            })
            .count();
        prop_assert_eq!(sub.edge_count(), inner);
        prop_assert!(sub.adjacency_consistent());
    }
}

#[test]
fn components_keep_at_least_ten_nodes() {
    // A 10-node path survives the default filter; a 9-node path does not.
    let mut pairs: Vec<(usize, usize, u8)> = (0..9).map(|i| (i, i + 1, 0)).collect();
    pairs.extend((10..18).map(|i| (i, i + 1, 0)));
    let g = build(19, &pairs);
    let comps = connected_components(&g, 10);
    assert_eq!(comps.graphs.len(), 1);
    assert_eq!(comps.graphs[0].node_count(), 10);
    assert_eq!((comps.filtered_components, comps.filtered_nodes), (1, 9));
}
