use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{
    position_features, AnchorSet, PairEncoder, PairFeatures, PositionFeatures, PredictorError,
};
use crate::graph::{bfs_distances, NodeId, PropertyGraph, DEFAULT_CUTOFF};
use crate::rng::{derive_seed, stage_rng};
use crate::sampler::{sample_negatives, LinkSample, SampleLabel, SampleOrigin, SampleSplit};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparameters {
    pub learning_rate: f64,
    pub epochs: usize,
    /// Subgraphs per mini-batch.
    pub batch_subgraphs: usize,
    pub l2: f64,
    pub seed: u64,
    pub anchor_count: usize,
    pub distance_cutoff: u32,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Hyperparameters {
            learning_rate: 0.1,
            epochs: 200,
            batch_subgraphs: 8,
            l2: 1e-4,
            seed: 0,
            anchor_count: super::DEFAULT_ANCHORS,
            distance_cutoff: DEFAULT_CUTOFF,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Example {
    pub x: PairFeatures,
    pub label: bool,
}

/// Labelled pair encodings grouped by the subgraph they came from.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainingSet {
    pub groups: Vec<Vec<Example>>,
}

impl TrainingSet {
    pub fn len(&self) -> usize {
        self.groups.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn examples(&self) -> impl Iterator<Item = &Example> {
        self.groups.iter().flatten()
    }
}

/// Build one training group per component.
///
/// Positives are the edges still present in each split's training graph;
/// each gets a corrupted negative drawn against the component's original
/// graph, so held-out positives never appear as negatives.
pub fn training_groups(
    parts: &[(&PropertyGraph, &SampleSplit)],
    encoder: &dyn PairEncoder,
) -> Result<TrainingSet, PredictorError> {
    let mut groups = Vec::with_capacity(parts.len());
    for (original, split) in parts {
        let positives: Vec<LinkSample> = split
            .training_graph
            .edges()
            .iter()
            .map(|e| LinkSample {
                u: e.source.clone(),
                v: e.target.clone(),
                label: SampleLabel::Positive,
                origin: SampleOrigin::HeldOutEdge,
            })
            .collect();
        let negatives = sample_negatives(
            original,
            &positives,
            derive_seed(split.seed, "training-negatives"),
        )?;
        let mut group = Vec::with_capacity(positives.len() * 2);
        for s in positives.iter().chain(&negatives) {
            group.push(Example {
                x: encoder.encode_ids(&s.u, &s.v)?,
                label: s.is_positive(),
            });
        }
        groups.push(group);
    }
    Ok(TrainingSet { groups })
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn dot(w: &[f64], x: &[f64]) -> f64 {
    w.iter().zip(x).map(|(a, b)| a * b).sum()
}

/// Mean binary cross-entropy plus `l2/2·‖w‖²`. The last weight is the bias
/// and is not regularized.
pub fn bce_loss(weights: &[f64], batch: &[&Example], l2: f64) -> f64 {
    bce_loss_and_gradient(weights, batch, l2).0
}

pub fn bce_loss_and_gradient(weights: &[f64], batch: &[&Example], l2: f64) -> (f64, Vec<f64>) {
    let d = weights.len();
    let mut grad = vec![0.0; d];
    let mut loss = 0.0;
    for ex in batch {
        let z = dot(weights, ex.x.as_slice());
        let y = if ex.label { 1.0 } else { 0.0 };
        loss += softplus(z) - y * z;
        let r = sigmoid(z) - y;
        for (g, xi) in grad.iter_mut().zip(ex.x.as_slice()) {
            *g += r * xi;
        }
    }
    let n = batch.len().max(1) as f64;
    loss /= n;
    for g in &mut grad {
        *g /= n;
    }
    let reg = &weights[..d.saturating_sub(1)];
    loss += 0.5 * l2 * reg.iter().map(|w| w * w).sum::<f64>();
    for (g, w) in grad.iter_mut().zip(reg) {
        *g += l2 * w;
    }
    (loss, grad)
}

/// Trained logistic head plus everything needed to rebuild its features.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScorerModel {
    pub format_version: u32,
    pub k: usize,
    pub anchors: Vec<NodeId>,
    pub weights: Vec<f64>,
    pub hyperparameters: Hyperparameters,
    pub seed: u64,
    pub training_log: Vec<f64>,
}

/// Fit weights by mini-batch gradient descent from all-zero initialization.
///
/// Each epoch visits the groups in a seeded random order, `batch_subgraphs`
/// groups per step. `training_log` holds the full-set loss after each epoch.
pub fn train(
    set: &TrainingSet,
    anchors: &AnchorSet,
    hp: &Hyperparameters,
) -> Result<ScorerModel, PredictorError> {
    let dim = 2 * anchors.len() + 2;
    let (weights, training_log) = fit_logistic(set, dim, hp)?;
    Ok(ScorerModel {
        format_version: MODEL_FORMAT_VERSION,
        k: anchors.len(),
        anchors: anchors.anchors.clone(),
        weights,
        hyperparameters: hp.clone(),
        seed: hp.seed,
        training_log,
    })
}

/// Logistic regression on an arbitrary encoding of width `dim`.
pub fn fit_logistic(
    set: &TrainingSet,
    dim: usize,
    hp: &Hyperparameters,
) -> Result<(Vec<f64>, Vec<f64>), PredictorError> {
    for ex in set.examples() {
        if ex.x.len() != dim {
            return Err(PredictorError::DimensionMismatch {
                expected: dim,
                got: ex.x.len(),
            });
        }
    }
    let has_pos = set.examples().any(|e| e.label);
    let has_neg = set.examples().any(|e| !e.label);
    if !has_pos || !has_neg {
        return Err(PredictorError::MissingClass);
    }
    let all: Vec<&Example> = set.examples().collect();
    let mut rng = stage_rng(hp.seed, "batches");
    let mut weights = vec![0.0; dim];
    let mut log = Vec::with_capacity(hp.epochs);
    let mut order: Vec<usize> = (0..set.groups.len()).collect();
    let per_batch = hp.batch_subgraphs.max(1);
    for epoch in 0..hp.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(per_batch) {
            let batch: Vec<&Example> = chunk.iter().flat_map(|&g| &set.groups[g]).collect();
            if batch.is_empty() {
                continue;
            }
            let (_, grad) = bce_loss_and_gradient(&weights, &batch, hp.l2);
            for (w, g) in weights.iter_mut().zip(&grad) {
                *w -= hp.learning_rate * g;
            }
        }
        let loss = bce_loss(&weights, &all, hp.l2);
        if !loss.is_finite() || weights.iter().any(|w| !w.is_finite()) {
            return Err(PredictorError::NonFiniteLoss { epoch });
        }
        log.push(loss);
    }
    Ok((weights, log))
}

impl ScorerModel {
    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn logit(&self, pair: &PairFeatures) -> Result<f64, PredictorError> {
        if pair.len() != self.weights.len() {
            return Err(PredictorError::DimensionMismatch {
                expected: self.weights.len(),
                got: pair.len(),
            });
        }
        Ok(dot(&self.weights, pair.as_slice()))
    }

    pub fn score(&self, pair: &PairFeatures) -> Result<f64, PredictorError> {
        self.logit(pair).map(sigmoid)
    }

    pub fn anchor_set(&self) -> AnchorSet {
        AnchorSet {
            anchors: self.anchors.clone(),
            seed: self.seed,
        }
    }

    /// Position features of every node in `g` relative to this model's anchors.
    pub fn positions(&self, g: &PropertyGraph) -> Result<PositionFeatures, PredictorError> {
        let table = bfs_distances(g, &self.anchors, self.hyperparameters.distance_cutoff)?;
        position_features(g, &self.anchor_set(), &table)
    }

    pub fn validate(&self) -> Result<(), PredictorError> {
        if self.format_version != MODEL_FORMAT_VERSION {
            return Err(PredictorError::UnsupportedFormat(self.format_version));
        }
        if self.weights.len() != 2 * self.k + 2 || self.anchors.len() != self.k {
            return Err(PredictorError::DimensionMismatch {
                expected: 2 * self.k + 2,
                got: self.weights.len(),
            });
        }
        Ok(())
    }
}
