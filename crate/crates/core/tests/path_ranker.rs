use std::collections::BTreeSet;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lpx_core::explain::path::{
    enumerate_paths, pair_path_types, rank_paths, train_path_ranker, tree_seed, ForestConfig,
    PathType, RandomForest,
};
use lpx_core::graph::{Edge, Label, Node, NodeId, PropertyGraph};
use lpx_core::rng::stage_rng;

type Vote = Box<dyn Fn(&[bool]) -> bool>;

/// Reference forest, written from the documented seed schedule: per tree,
/// `n` bootstrap draws, then `⌈√p⌉` sorted candidate features per node in
/// pre-order with the absent branch first; strict best Gini decrease wins.
struct Reference {
    votes: Vec<Vote>,
    importances: Vec<f64>,
}

enum RefNode {
    Leaf(f64),
    Split(usize, Box<RefNode>, Box<RefNode>),
}

fn ref_eval(node: &RefNode, x: &[bool]) -> f64 {
    match node {
        RefNode::Leaf(f) => *f,
        RefNode::Split(f, absent, present) => ref_eval(if x[*f] { present } else { absent }, x),
    }
}

fn weighted_gini(pos: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = pos as f64 / n as f64;
    2.0 * p * (1.0 - p) * n as f64
}

#[allow(clippy::too_many_arguments)]
fn ref_grow(
    x: &[Vec<bool>],
    y: &[bool],
    rows: Vec<usize>,
    depth: usize,
    max_depth: usize,
    mtry: usize,
    rng: &mut ChaCha8Rng,
    imp: &mut [f64],
) -> RefNode {
    let n = rows.len();
    let pos = rows.iter().filter(|&&r| y[r]).count();
    let frac = if n == 0 { 0.0 } else { pos as f64 / n as f64 };
    if depth >= max_depth || pos == 0 || pos == n || n < 2 {
        return RefNode::Leaf(frac);
    }
    let p = x[0].len();
    let mut cand = index::sample(rng, p, mtry).into_vec();
    cand.sort_unstable();
    let mut best: Option<(f64, usize)> = None;
    for f in cand {
        let inside: Vec<usize> = rows.iter().copied().filter(|&r| x[r][f]).collect();
        if inside.is_empty() || inside.len() == n {
            continue;
        }
        let p1 = inside.iter().filter(|&&r| y[r]).count();
        let d = weighted_gini(pos, n)
            - weighted_gini(pos - p1, n - inside.len())
            - weighted_gini(p1, inside.len());
        if d > 1e-12 && best.is_none_or(|(bd, _)| d > bd) {
            best = Some((d, f));
        }
    }
    let Some((d, f)) = best else {
        return RefNode::Leaf(frac);
    };
    imp[f] += d;
    let absent: Vec<usize> = rows.iter().copied().filter(|&r| !x[r][f]).collect();
    let present: Vec<usize> = rows.iter().copied().filter(|&r| x[r][f]).collect();
    let a = ref_grow(x, y, absent, depth + 1, max_depth, mtry, rng, imp);
    let b = ref_grow(x, y, present, depth + 1, max_depth, mtry, rng, imp);
    RefNode::Split(f, Box::new(a), Box::new(b))
}

fn reference_forest(x: &[Vec<bool>], y: &[bool], trees: usize, max_depth: usize, seed: u64) -> Reference {
    let (n, p) = (x.len(), x[0].len());
    let mtry = ((p as f64).sqrt().ceil() as usize).max(1).min(p);
    let mut imp = vec![0.0; p];
    let mut votes: Vec<Vote> = Vec::new();
    for t in 0..trees {
        let mut rng = ChaCha8Rng::seed_from_u64(tree_seed(seed, t));
        let rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
        let tree = ref_grow(x, y, rows, 0, max_depth, mtry, &mut rng, &mut imp);
        votes.push(Box::new(move |v: &[bool]| ref_eval(&tree, v) > 0.5));
    }
    let total: f64 = imp.iter().sum();
    Reference {
        votes,
        importances: imp.iter().map(|v| if total > 0.0 { v / total } else { 0.0 }).collect(),
    }
}

impl Reference {
    fn predict(&self, x: &[bool]) -> bool {
        2 * self.votes.iter().filter(|v| v(x)).count() > self.votes.len()
    }
}

fn graph(edges: &[(&str, &str, &str)]) -> PropertyGraph {
    let ids: BTreeSet<&str> = edges.iter().flat_map(|(a, b, _)| [*a, *b]).collect();
    let nodes = ids.iter().map(|i| Node::new(*i, Label::Person)).collect();
    let edges = edges.iter().map(|(a, b, r)| Edge::new(a, b, r)).collect();
    PropertyGraph::build(nodes, edges).unwrap().0
}

fn random_graph(n: usize, m: usize, seed: u64) -> PropertyGraph {
    let mut rng = stage_rng(seed, "path-fixture");
    let rel = ["knows", "colleague", "family", "owns"];
    let nodes = (0..n).map(|i| Node::new(format!("n{i:02}"), Label::Person)).collect();
    let edges = (0..m)
        .filter_map(|_| {
            let (a, b) = (rng.random_range(0..n), rng.random_range(0..n));
            (a != b).then(|| Edge::new(&format!("n{a:02}"), &format!("n{b:02}"), rel[rng.random_range(0..4)]))
        })
        .collect();
    PropertyGraph::build(nodes, edges).unwrap().0
}

#[test]
fn forest_matches_reference_on_random_features() {
    let mut rng = stage_rng(2, "forest-fixture");
    for case in 0..5u64 {
        let p = 3 + case as usize * 3;
        let x: Vec<Vec<bool>> = (0..100).map(|_| (0..p).map(|_| rng.random_bool(0.4)).collect()).collect();
        let y: Vec<bool> = x.iter().map(|r| (r[0] && !r[1]) || (r[2] && rng.random_bool(0.7))).collect();
        let forest = RandomForest::fit(&x, &y, 50, 3, case);
        let reference = reference_forest(&x, &y, 50, 3, case);
        for row in &x {
            assert_eq!(forest.predict(row), reference.predict(row), "case {case}");
        }
        for (a, b) in forest.importances.iter().zip(&reference.importances) {
            assert!((a - b).abs() < 1e-12, "case {case}: importance {a} vs {b}");
        }
        assert!(forest.trees.iter().all(|t| t.depth() <= 3));
    }
}

#[test]
fn ranker_matches_reference_on_hundred_pairs() {
    let g = random_graph(40, 120, 9);
    let mut rng = stage_rng(9, "pairs");
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    while pos.len() + neg.len() < 100 {
        let (a, b) = (rng.random_range(0..40), rng.random_range(0..40));
        if a == b {
            continue;
        }
        let pair = (g.node(a).id.clone(), g.node(b).id.clone());
        if g.is_adjacent(a, b) && pos.len() < 50 {
            pos.push(pair);
        } else if !g.is_adjacent(a, b) && neg.len() < 50 {
            neg.push(pair);
        } else if pos.len() < 50 {
            // Not enough edges sampled yet; take a random edge instead.
            let e = rng.random_range(0..g.edge_count());
            let (s, t) = g.edge_endpoints(e);
            pos.push((g.node(s).id.clone(), g.node(t).id.clone()));
        }
    }
    let cfg = ForestConfig {
        seed: 4,
        ..ForestConfig::default()
    };
    let ranker = train_path_ranker(&g, &pos, &neg, &cfg).unwrap();
    let pairs: Vec<(NodeId, NodeId)> = pos.iter().chain(&neg).cloned().collect();
    let types = pair_path_types(&g, &pairs, cfg.max_len, cfg.max_count, false).unwrap();
    let x: Vec<Vec<bool>> = types
        .iter()
        .map(|set| ranker.vocabulary.iter().map(|t| set.contains(t)).collect())
        .collect();
    let y: Vec<bool> = (0..pairs.len()).map(|i| i < pos.len()).collect();
    let reference = reference_forest(&x, &y, cfg.trees, cfg.max_depth, cfg.seed);
    for row in &x {
        assert_eq!(ranker.forest.predict(row), reference.predict(row));
    }
    for (a, b) in ranker.forest.importances.iter().zip(&reference.importances) {
        assert!((a - b).abs() < 1e-12);
    }
    assert_eq!(train_path_ranker(&g, &pos, &neg, &cfg).unwrap(), ranker);
}

#[test]
fn shared_path_type_of_linked_pairs_ranks_first() {
    let mut edges = Vec::new();
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    let names: Vec<[String; 6]> = (0..6)
        .map(|i| ["a", "m", "b", "c", "n", "d"].map(|p| format!("{p}{i}")))
        .collect();
    let decoys = [("colleague", "family"), ("family", "family"), ("colleague", "colleague")];
    for (i, [a, m, b, c, n, d]) in names.iter().enumerate() {
        edges.push((a.as_str(), m.as_str(), "knows"));
        edges.push((m.as_str(), b.as_str(), "knows"));
        let (r1, r2) = decoys[i % 3];
        edges.push((c.as_str(), n.as_str(), r1));
        edges.push((n.as_str(), d.as_str(), r2));
        pos.push((NodeId::from(a.as_str()), NodeId::from(b.as_str())));
        neg.push((NodeId::from(c.as_str()), NodeId::from(d.as_str())));
    }
    let g = graph(&edges);
    let ranker = train_path_ranker(&g, &pos, &neg, &ForestConfig::default()).unwrap();
    // Importances recomputed from scratch with the reference forest.
    let types = pair_path_types(&g, &pos.iter().chain(&neg).cloned().collect::<Vec<_>>(), 4, 200, false).unwrap();
    let x: Vec<Vec<bool>> = types
        .iter()
        .map(|s| ranker.vocabulary.iter().map(|t| s.contains(t)).collect())
        .collect();
    let y: Vec<bool> = (0..12).map(|i| i < 6).collect();
    let reference = reference_forest(&x, &y, 50, 3, 0);
    let best = reference
        .importances
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .unwrap()
        .0;
    assert_eq!(ranker.vocabulary[best].to_string(), "knows > knows");
    assert_eq!(ranker.ranked_types()[0].0.to_string(), "knows > knows");
}

#[test]
fn one_pair_per_class_reports_oob_and_is_deterministic() {
    let g = graph(&[("a", "m", "knows"), ("m", "b", "knows"), ("c", "n", "owns"), ("n", "d", "family")]);
    let pos = [(NodeId::from("a"), NodeId::from("b"))];
    let neg = [(NodeId::from("c"), NodeId::from("d"))];
    let cfg = ForestConfig::default();
    let first = train_path_ranker(&g, &pos, &neg, &cfg).unwrap();
    let second = train_path_ranker(&g, &pos, &neg, &cfg).unwrap();
    assert_eq!(first, second);
    let oob = first.forest.oob_accuracy.expect("some rows are out of bag");
    assert!((0.0..=1.0).contains(&oob));
}

#[test]
fn ranking_is_a_sorted_permutation() {
    let g = random_graph(14, 40, 5);
    let mut rng = stage_rng(5, "rank");
    let pairs: Vec<(NodeId, NodeId)> = (0..30)
        .map(|_| {
            let a = rng.random_range(0..14);
            let b = (a + rng.random_range(1..14)) % 14;
            (g.node(a).id.clone(), g.node(b).id.clone())
        })
        .collect();
    let (pos, neg) = pairs.split_at(15);
    let ranker = train_path_ranker(&g, pos, neg, &ForestConfig::default()).unwrap();
    for (u, v) in &pairs {
        let paths = enumerate_paths(&g, u, v, 4, 200, false).unwrap();
        let ranked = rank_paths(&ranker, &g, (u.clone(), v.clone()), &paths);
        assert_eq!(ranked.paths.len(), paths.len());
        // Oracle: score by importance lookup, then length, nodes, relations.
        let mut want: Vec<(f64, usize, Vec<NodeId>, Vec<String>)> = paths
            .iter()
            .map(|p| {
                let t = PathType::of(&g, p, false);
                let score = ranker
                    .vocabulary
                    .iter()
                    .position(|x| *x == t)
                    .map_or(0.0, |i| ranker.forest.importances[i]);
                (score, p.len(), p.nodes.clone(), p.relations.clone())
            })
            .collect();
        want.sort_by(|a, b| {
            b.0.partial_cmp(&a.0)
                .unwrap()
                .then(a.1.cmp(&b.1))
                .then(a.2.cmp(&b.2))
                .then(a.3.cmp(&b.3))
        });
        let got: Vec<(f64, Vec<NodeId>, Vec<String>)> = ranked
            .paths
            .iter()
            .map(|p| (p.score, p.nodes.clone(), p.relations.clone()))
            .collect();
        let want: Vec<(f64, Vec<NodeId>, Vec<String>)> =
            want.into_iter().map(|(s, _, n, r)| (s, n, r)).collect();
        assert_eq!(got, want);
        assert_eq!(ranked.top_path, ranked.paths.first().cloned());
        for p in &paths {
            assert!(p.is_valid_in(&g));
        }
    }
}

#[test]
fn empty_path_list_has_no_top() {
    let g = graph(&[("a", "m", "knows"), ("m", "b", "knows"), ("c", "n", "owns"), ("n", "d", "family")]);
    let ranker = train_path_ranker(
        &g,
        &[(NodeId::from("a"), NodeId::from("b"))],
        &[(NodeId::from("c"), NodeId::from("d"))],
        &ForestConfig::default(),
    )
    .unwrap();
    let ranked = rank_paths(&ranker, &g, (NodeId::from("a"), NodeId::from("d")), &[]);
    assert!(ranked.paths.is_empty() && ranked.top_path.is_none());
}
