//! Surrogate distillation and anchor rules.
//!
//! The link scorer's thresholded decisions on a set of node pairs are used to
//! grow a small decision tree over interpretable pair features; an anchor
//! rule is then searched for against that tree.

mod instance;
mod search;
mod tree;

pub use instance::{
    attribute_keys, build_instances, describe_pairs, DistanceBucket, FeatureKind, FeatureSchema,
    InterpretableInstance,
};
pub use search::{
    candidate_predicates, estimate_precision, explain_anchor, AnchorConfig, AnchorsRule,
    Comparator, PerturbationSpace, Predicate,
};
pub use tree::{fit_surrogate, majority_rate, Classifier, Surrogate, TreeNode, DEFAULT_MAX_DEPTH};

use thiserror::Error;

use crate::graph::NodeId;
use crate::predictor::PredictorError;

#[derive(Debug, Error)]
pub enum AnchorsError {
    #[error("pair ({0}, {1}) references an unknown node")]
    UnknownPair(NodeId, NodeId),
    #[error("no instances to learn from")]
    NoInstances,
    #[error("{instances} instances but {labels} labels")]
    LengthMismatch { instances: usize, labels: usize },
    #[error("instance has {got} features, schema has {expected}")]
    SchemaMismatch { expected: usize, got: usize },
    #[error("rule mentions unknown feature `{0}`")]
    UnknownFeature(String),
    #[error("no background value of `{0}` satisfies the rule")]
    EmptyPool(String),
    #[error("feature schema is empty; no predicates can be formed")]
    EmptyRuleSpace,
    #[error(transparent)]
    Predictor(#[from] PredictorError),
}

/// A fitted surrogate with the background distribution it was fitted on.
#[derive(Clone, Debug)]
pub struct AnchorExplainer {
    pub surrogate: Surrogate,
    pub space: PerturbationSpace,
    pub config: AnchorConfig,
}

impl AnchorExplainer {
    pub fn fit(
        schema: FeatureSchema,
        labelled: &[(InterpretableInstance, bool)],
        max_depth: usize,
        config: AnchorConfig,
    ) -> Result<Self, AnchorsError> {
        let x: Vec<Vec<i64>> = labelled.iter().map(|(i, _)| i.values.clone()).collect();
        let y: Vec<bool> = labelled.iter().map(|(_, l)| *l).collect();
        let surrogate = fit_surrogate(&schema, &x, &y, max_depth, config.seed)?;
        let space = PerturbationSpace::new(schema, x)?;
        Ok(AnchorExplainer {
            surrogate,
            space,
            config,
        })
    }

    pub fn explain(&self, instance: &InterpretableInstance) -> Result<AnchorsRule, AnchorsError> {
        let mut rule = explain_anchor(&self.surrogate, &self.space, &instance.values, &self.config)?;
        rule.fidelity_of_surrogate = Some(self.surrogate.fidelity);
        Ok(rule)
    }
}
