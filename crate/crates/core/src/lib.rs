//! Explainable link prediction for property graphs of people and
//! organizations.

pub mod artifacts;
pub mod eval;
pub mod explain;
pub mod graph;
pub mod jsonl;
pub mod pipeline;
pub mod predictor;
pub mod rng;
pub mod sampler;
pub mod synth;

pub use graph::{
    bfs_distances, connected_components, load_graph, DistanceTable, Edge, Label, Node, NodeId,
    PropertyGraph,
};
pub use predictor::{LinkPrediction, ScorerModel};
pub use sampler::{LinkSample, SampleSplit};
