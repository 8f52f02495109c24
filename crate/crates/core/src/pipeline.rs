//! End-to-end stages shared by the command line driver and the service:
//! component filtering, per-component splits, training, scoring and the
//! explainer suite.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::{roc_auc, EvalError, EvaluationReport, ScoredLabel, SeedAuc};
use crate::explain::anchors::{
    attribute_keys, build_instances, describe_pairs, AnchorConfig, AnchorExplainer, AnchorsError,
    DEFAULT_MAX_DEPTH,
};
use crate::explain::path::{enumerate_paths, rank_paths, train_path_ranker, ForestConfig, PathError, PathRanker};
use crate::explain::verify::{verify_link, CorpusIndex, VerifyError};
use crate::explain::{Explanation, Technique};
use crate::graph::{bfs_distances, connected_components, GraphError, NodeId, PropertyGraph};
use crate::predictor::{
    fit_logistic, position_features, predict_watchlist, select_anchors, sigmoid, train, training_groups,
    DegreeEncoder, Hyperparameters, LinkPrediction, PairEncoder, PositionEncoder, PredictorError,
    ScorerModel, DEFAULT_THRESHOLD,
};
use crate::rng::derive_seed;
use crate::sampler::{split_with_negatives, LinkSample, SampleSplit, SamplerError, DEFAULT_SPLIT_RATIO};

pub const DEFAULT_MIN_COMPONENT_SIZE: usize = 10;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("no connected component has at least {0} nodes")]
    NoComponents(usize),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Predictor(#[from] PredictorError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub min_component_size: usize,
    pub split_ratio: f64,
    pub hyperparameters: Hyperparameters,
    /// Seeds of the multi-seed evaluation report.
    pub eval_seeds: Vec<u64>,
    pub threshold: f64,
    pub top_n: usize,
    pub verification_top_k: usize,
    pub surrogate_depth: usize,
    pub anchors: AnchorConfig,
    pub forest: ForestConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            min_component_size: DEFAULT_MIN_COMPONENT_SIZE,
            split_ratio: DEFAULT_SPLIT_RATIO,
            hyperparameters: Hyperparameters::default(),
            eval_seeds: vec![0, 1, 2, 3, 4],
            threshold: DEFAULT_THRESHOLD,
            top_n: 20,
            verification_top_k: 5,
            surrogate_depth: DEFAULT_MAX_DEPTH,
            anchors: AnchorConfig::default(),
            forest: ForestConfig::default(),
        }
    }
}

impl RunConfig {
    /// Explainer settings with every explainer seed set to the run seed.
    pub fn explain_settings(&self) -> ExplainSettings {
        let seed = self.hyperparameters.seed;
        ExplainSettings {
            verification_top_k: self.verification_top_k,
            surrogate_depth: self.surrogate_depth,
            threshold: self.threshold,
            anchors: AnchorConfig {
                seed,
                ..self.anchors.clone()
            },
            forest: ForestConfig {
                seed,
                ..self.forest.clone()
            },
        }
    }
}

/// The component-filtered graph with one split per component.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub graph: PropertyGraph,
    pub components: Vec<PropertyGraph>,
    pub splits: Vec<SampleSplit>,
    /// Union of the per-component training graphs.
    pub training_graph: PropertyGraph,
    pub filtered_components: usize,
    pub filtered_nodes: usize,
}

impl Prepared {
    /// Held-out positives and their negatives, component by component.
    pub fn test_samples(&self) -> Vec<LinkSample> {
        self.splits
            .iter()
            .flat_map(|s| s.samples().cloned())
            .collect()
    }
}

/// Seed used for the split of component `i`.
pub fn component_seed(seed: u64, i: usize) -> u64 {
    derive_seed(seed, &format!("split-{i}"))
}

/// Drop small components and split the rest.
pub fn prepare(
    g: &PropertyGraph,
    min_component_size: usize,
    ratio: f64,
    seed: u64,
) -> Result<Prepared, PipelineError> {
    let comps = connected_components(g, min_component_size);
    if comps.graphs.is_empty() {
        return Err(PipelineError::NoComponents(min_component_size));
    }
    let splits = comps
        .graphs
        .iter()
        .enumerate()
        .map(|(i, c)| split_with_negatives(c, ratio, component_seed(seed, i)))
        .collect::<Result<Vec<_>, _>>()?;
    let training_parts: Vec<PropertyGraph> =
        splits.iter().map(|s| s.training_graph.clone()).collect();
    Ok(Prepared {
        graph: PropertyGraph::disjoint_union(&comps.graphs)?,
        training_graph: PropertyGraph::disjoint_union(&training_parts)?,
        components: comps.graphs,
        splits,
        filtered_components: comps.filtered_components,
        filtered_nodes: comps.filtered_nodes,
    })
}

/// Train the position-aware scorer. Anchors and distances come from the
/// training graph only, so held-out edges never shape the features.
pub fn train_scorer(prepared: &Prepared, hp: &Hyperparameters) -> Result<ScorerModel, PipelineError> {
    let g = &prepared.training_graph;
    let anchors = select_anchors(g, hp.anchor_count, hp.seed)?;
    let table = bfs_distances(g, &anchors.anchors, hp.distance_cutoff)?;
    let positions = position_features(g, &anchors, &table)?;
    let encoder = PositionEncoder::new(g, &positions);
    let parts: Vec<(&PropertyGraph, &SampleSplit)> =
        prepared.components.iter().zip(&prepared.splits).collect();
    let set = training_groups(&parts, &encoder)?;
    Ok(train(&set, &anchors, hp)?)
}

/// Score the held-out test samples with a trained scorer.
pub fn score_test_samples(
    model: &ScorerModel,
    prepared: &Prepared,
) -> Result<Vec<ScoredLabel>, PipelineError> {
    let positions = model.positions(&prepared.training_graph)?;
    let encoder = PositionEncoder::new(&prepared.training_graph, &positions);
    score_with(&encoder, |x| model.score(x), &prepared.test_samples())
}

fn score_with<F>(
    encoder: &dyn PairEncoder,
    score: F,
    samples: &[LinkSample],
) -> Result<Vec<ScoredLabel>, PipelineError>
where
    F: Fn(&crate::predictor::PairFeatures) -> Result<f64, PredictorError>,
{
    samples
        .iter()
        .map(|s| {
            let x = encoder.encode_ids(&s.u, &s.v)?;
            Ok(ScoredLabel::new(score(&x)?, s.is_positive()))
        })
        .collect()
}

/// Same procedure as [`train_scorer`] and [`score_test_samples`] with a
/// degree-only encoding in place of anchor positions.
pub fn degree_baseline_scores(
    prepared: &Prepared,
    hp: &Hyperparameters,
) -> Result<Vec<ScoredLabel>, PipelineError> {
    let encoder = DegreeEncoder::new(&prepared.training_graph);
    let parts: Vec<(&PropertyGraph, &SampleSplit)> =
        prepared.components.iter().zip(&prepared.splits).collect();
    let set = training_groups(&parts, &encoder)?;
    let (weights, _) = fit_logistic(&set, encoder.dim(), hp)?;
    score_with(
        &encoder,
        |x| Ok(sigmoid(x.0.iter().zip(&weights).map(|(a, b)| a * b).sum())),
        &prepared.test_samples(),
    )
}

/// Held-out ROC AUC of the scorer for each seed; split, anchors and batch
/// order all follow the seed.
pub fn evaluate_seeds(
    g: &PropertyGraph,
    config: &RunConfig,
    dataset: &str,
) -> Result<EvaluationReport, PipelineError> {
    if config.eval_seeds.len() < 2 {
        return Err(EvalError::TooFewSeeds(config.eval_seeds.len()).into());
    }
    let mut runs = Vec::with_capacity(config.eval_seeds.len());
    for &seed in &config.eval_seeds {
        let prepared = prepare(g, config.min_component_size, config.split_ratio, seed)?;
        let hp = Hyperparameters {
            seed,
            ..config.hyperparameters.clone()
        };
        let model = train_scorer(&prepared, &hp)?;
        let auc = roc_auc(&score_test_samples(&model, &prepared)?).map_err(|e| EvalError::Seed {
            seed,
            source: Box::new(e),
        })?;
        runs.push(SeedAuc { seed, auc });
    }
    Ok(EvaluationReport::from_runs(dataset, "position-aware scorer", runs))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExplainSettings {
    pub verification_top_k: usize,
    pub surrogate_depth: usize,
    pub threshold: f64,
    pub anchors: AnchorConfig,
    pub forest: ForestConfig,
}

impl Default for ExplainSettings {
    fn default() -> Self {
        RunConfig::default().explain_settings()
    }
}

#[derive(Debug, Error)]
pub enum ExplainError {
    #[error("unknown node `{0}`")]
    UnknownNode(NodeId),
    #[error("no path evidence between {0} and {1}")]
    NoPathEvidence(NodeId, NodeId),
    #[error("{technique} explanations unavailable: {reason}")]
    Unavailable { technique: Technique, reason: String },
    #[error(transparent)]
    Verify(#[from] VerifyError),
    #[error(transparent)]
    Anchors(#[from] AnchorsError),
    #[error(transparent)]
    Path(#[from] PathError),
}

struct AnchorSuite {
    keys: BTreeSet<String>,
    explainer: AnchorExplainer,
}

/// Everything needed to explain links on one graph with one model.
pub struct ExplainerSuite {
    pub graph: PropertyGraph,
    pub model: ScorerModel,
    pub settings: ExplainSettings,
    corpus: Option<CorpusIndex>,
    anchors: Result<AnchorSuite, String>,
    paths: Result<PathRanker, String>,
}

impl ExplainerSuite {
    /// Fit the surrogate and the path ranker.
    ///
    /// The surrogate learns the scorer's decisions on `background` plus
    /// `extra_pairs`; the path ranker learns to separate the positive
    /// background samples from the negative ones. Either explainer that
    /// cannot be fitted is reported as unavailable at explain time.
    pub fn build(
        graph: PropertyGraph,
        model: ScorerModel,
        corpus: Option<CorpusIndex>,
        background: &[LinkSample],
        extra_pairs: &[(NodeId, NodeId)],
        settings: ExplainSettings,
    ) -> Result<Self, PipelineError> {
        model.validate()?;
        let mut pairs: Vec<(NodeId, NodeId)> =
            background.iter().map(|s| (s.u.clone(), s.v.clone())).collect();
        pairs.extend(extra_pairs.iter().cloned());

        let anchors = build_instances(&graph, &model, &pairs, settings.threshold)
            .and_then(|(schema, labelled)| {
                AnchorExplainer::fit(schema, &labelled, settings.surrogate_depth, settings.anchors.clone())
            })
            .map(|explainer| AnchorSuite {
                keys: attribute_keys(&graph),
                explainer,
            })
            .map_err(|e| e.to_string());

        let split = |positive: bool| -> Vec<(NodeId, NodeId)> {
            background
                .iter()
                .filter(|s| s.is_positive() == positive)
                .map(|s| (s.u.clone(), s.v.clone()))
                .collect()
        };
        let paths = train_path_ranker(&graph, &split(true), &split(false), &settings.forest)
            .map_err(|e| e.to_string());

        Ok(ExplainerSuite {
            graph,
            model,
            settings,
            corpus,
            anchors,
            paths,
        })
    }

    pub fn path_ranker(&self) -> Option<&PathRanker> {
        self.paths.as_ref().ok()
    }

    pub fn anchor_explainer(&self) -> Option<&AnchorExplainer> {
        self.anchors.as_ref().ok().map(|a| &a.explainer)
    }

    pub fn predict(
        &self,
        watchlist: &[NodeId],
        threshold: f64,
        top_n: usize,
    ) -> Result<Vec<LinkPrediction>, PredictorError> {
        predict_watchlist(&self.model, &self.graph, watchlist, threshold, top_n)
    }

    pub fn explain(
        &self,
        u: &NodeId,
        v: &NodeId,
        technique: Technique,
    ) -> Result<Explanation, ExplainError> {
        let (Some(a), Some(b)) = (self.graph.index_of(u), self.graph.index_of(v)) else {
            let missing = if self.graph.contains(u) { v } else { u };
            return Err(ExplainError::UnknownNode(missing.clone()));
        };
        match technique {
            Technique::Verification => {
                let index = self.corpus.as_ref().ok_or_else(|| ExplainError::Unavailable {
                    technique,
                    reason: "no corpus loaded".into(),
                })?;
                let result = verify_link(
                    index,
                    self.graph.node(a).display_name(),
                    self.graph.node(b).display_name(),
                    self.settings.verification_top_k,
                )?;
                Ok(Explanation::Verification(result))
            }
            Technique::Anchors => {
                let suite = self.anchors.as_ref().map_err(|reason| ExplainError::Unavailable {
                    technique,
                    reason: reason.clone(),
                })?;
                let schema = suite.explainer.space.schema();
                let instance = describe_pairs(&self.graph, schema, &suite.keys, &[(u.clone(), v.clone())])?
                    .pop()
                    .expect("one pair in, one instance out");
                Ok(Explanation::Anchors(suite.explainer.explain(&instance)?))
            }
            Technique::PathRanking => {
                let ranker = self.paths.as_ref().map_err(|reason| ExplainError::Unavailable {
                    technique,
                    reason: reason.clone(),
                })?;
                let paths = enumerate_paths(
                    &self.graph,
                    u,
                    v,
                    ranker.config.max_len,
                    ranker.config.max_count,
                    false,
                )?;
                if paths.is_empty() {
                    return Err(ExplainError::NoPathEvidence(u.clone(), v.clone()));
                }
                Ok(Explanation::PathRanking(rank_paths(
                    ranker,
                    &self.graph,
                    (u.clone(), v.clone()),
                    &paths,
                )))
            }
        }
    }
}
