use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use rand::Rng;

use lpx_core::eval::{roc_auc, ScoredLabel};
use lpx_core::explain::path::{enumerate_paths, DEFAULT_MAX_COUNT, DEFAULT_MAX_LEN};
use lpx_core::graph::{bfs_distances, NodeId};
use lpx_core::pipeline::{prepare, train_scorer};
use lpx_core::predictor::{position_features, select_anchors, Hyperparameters};
use lpx_core::rng::stage_rng;
use lpx_core::synth::{community_graph, CommunitySpec};

fn auc(c: &mut Criterion) {
    let mut rng = stage_rng(1, "bench-auc");
    let items: Vec<ScoredLabel> = (0..10_000)
        .map(|_| ScoredLabel::new(rng.random_range(0..200) as f64, rng.random_bool(0.5)))
        .collect();
    c.bench_function("roc_auc/10k", |b| b.iter(|| roc_auc(black_box(&items)).unwrap()));
}

fn positions(c: &mut Criterion) {
    let g = community_graph(&CommunitySpec::default(), 0).graph;
    let hp = Hyperparameters::default();
    c.bench_function("anchor_positions/120", |b| {
        b.iter(|| {
            let anchors = select_anchors(&g, hp.anchor_count, 0).unwrap();
            let table = bfs_distances(&g, &anchors.anchors, hp.distance_cutoff).unwrap();
            position_features(&g, &anchors, &table).unwrap()
        })
    });
}

fn training(c: &mut Criterion) {
    let g = community_graph(&CommunitySpec::default(), 0).graph;
    let prepared = prepare(&g, 10, 0.1, 0).unwrap();
    let hp = Hyperparameters {
        epochs: 20,
        ..Hyperparameters::default()
    };
    let mut group = c.benchmark_group("train");
    group.sample_size(10);
    group.bench_function("scorer/20-epochs", |b| {
        b.iter(|| train_scorer(black_box(&prepared), &hp).unwrap())
    });
    group.finish();
}

fn paths(c: &mut Criterion) {
    let g = community_graph(&CommunitySpec::default(), 0).graph;
    let (u, v) = (NodeId::from("p000"), NodeId::from("p030"));
    c.bench_function("enumerate_paths/len4", |b| {
        b.iter(|| enumerate_paths(&g, &u, &v, DEFAULT_MAX_LEN, DEFAULT_MAX_COUNT, false).unwrap())
    });
}

criterion_group!(benches, auc, positions, training, paths);
criterion_main!(benches);
