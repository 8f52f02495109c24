//! Position-aware link scorer.
//!
//! Nodes are described by inverse hop distances to a sampled anchor set; a
//! node pair is encoded from the two position vectors plus attribute overlap,
//! and a logistic head trained by mini-batch gradient descent turns the pair
//! encoding into a link probability.

mod anchors;
mod features;
mod model;
mod watchlist;

pub use anchors::{position_features, select_anchors, AnchorSet, PositionFeatures, DEFAULT_ANCHORS};
pub use features::{
    attribute_jaccard, DegreeEncoder, PairEncoder, PairFeatures, PositionEncoder,
};
pub use model::{
    bce_loss, bce_loss_and_gradient, fit_logistic, sigmoid, train, training_groups, Example, Hyperparameters,
    ScorerModel, TrainingSet, MODEL_FORMAT_VERSION,
};
pub use watchlist::{predict_watchlist, score_pairs, LinkPrediction, DEFAULT_THRESHOLD};

use thiserror::Error;

use crate::graph::{GraphError, NodeId};
use crate::sampler::SamplerError;

#[derive(Debug, Error)]
pub enum PredictorError {
    #[error("graph is empty")]
    EmptyGraph,
    #[error("anchor `{0}` has no row in the distance table")]
    AnchorMissingFromTable(NodeId),
    #[error("feature dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("loss became non-finite at epoch {epoch}; lower the learning rate")]
    NonFiniteLoss { epoch: usize },
    #[error("training set needs both positive and negative examples")]
    MissingClass,
    #[error("watchlist node `{0}` is not in the graph")]
    UnknownWatchlistNode(NodeId),
    #[error("unsupported model format version {0}")]
    UnsupportedFormat(u32),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
}
