//! On-disk layout of a run directory and the loaders shared by the command
//! line driver and the service.

use std::fs::{self, File};
use std::io::{self, BufReader};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

use crate::explain::verify::{index_corpus, CorpusIndex, Document, VerifyError};
use crate::graph::{load_graph, GraphError, NodeId, PropertyGraph};
use crate::jsonl::{self, JsonlError};
use crate::pipeline::{ExplainSettings, ExplainerSuite, PipelineError};
use crate::predictor::{LinkPrediction, PredictorError, ScorerModel};
use crate::sampler::SampleRecord;

pub const GRAPH_NODES: &str = "graph/nodes.jsonl";
pub const GRAPH_EDGES: &str = "graph/edges.jsonl";
pub const INGEST_REPORT: &str = "ingest_report.json";
pub const SAMPLES: &str = "samples.jsonl";
pub const MODEL: &str = "model.json";
pub const PREDICTIONS: &str = "predictions.jsonl";
pub const EXPLANATIONS: &str = "explanations.jsonl";
pub const EXPLAIN_REPORT: &str = "explain_report.json";
pub const EVAL_REPORT_JSON: &str = "eval_report.json";
pub const EVAL_REPORT_TEXT: &str = "eval_report.txt";
pub const AGREEMENT_JSON: &str = "agreement_report.json";
pub const AGREEMENT_TEXT: &str = "agreement_report.txt";
pub const RUN_CONFIG: &str = "run_config.json";

#[derive(Debug, Error)]
pub enum ArtifactError {
    #[error("{path}: file not found")]
    Missing { path: PathBuf },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {reason}")]
    Parse { path: PathBuf, reason: String },
    #[error("{path}: {source}")]
    Graph {
        path: PathBuf,
        #[source]
        source: GraphError,
    },
    #[error("{path}: {source}")]
    Corpus {
        path: PathBuf,
        #[source]
        source: VerifyError,
    },
    #[error("{path}: {source}")]
    Model {
        path: PathBuf,
        #[source]
        source: PredictorError,
    },
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}

impl ArtifactError {
    /// True when the inputs themselves are missing or malformed.
    pub fn is_data_error(&self) -> bool {
        !matches!(self, ArtifactError::Pipeline(_))
    }
}

fn io_error(path: &Path, source: io::Error) -> ArtifactError {
    if source.kind() == io::ErrorKind::NotFound {
        ArtifactError::Missing {
            path: path.to_path_buf(),
        }
    } else {
        ArtifactError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

pub fn open(path: &Path) -> Result<BufReader<File>, ArtifactError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| io_error(path, e))
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), ArtifactError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| io_error(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| io_error(path, e))
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), ArtifactError> {
    let mut text = serde_json::to_string_pretty(value).expect("artifact types serialize");
    text.push('\n');
    write_bytes(path, text.as_bytes())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, ArtifactError> {
    serde_json::from_reader(open(path)?).map_err(|e| ArtifactError::Parse {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

pub fn write_jsonl<'a, T: Serialize + 'a>(
    path: &Path,
    records: impl IntoIterator<Item = &'a T>,
) -> Result<(), ArtifactError> {
    write_bytes(path, jsonl::to_string(records).as_bytes())
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, ArtifactError> {
    jsonl::read_records(open(path)?).map_err(|e| match e {
        JsonlError::Io(source) => io_error(path, source),
        JsonlError::Parse { line, source } => ArtifactError::Parse {
            path: path.to_path_buf(),
            reason: format!("line {line}: {source}"),
        },
    })
}

pub fn read_graph_files(nodes: &Path, edges: &Path) -> Result<PropertyGraph, ArtifactError> {
    let node_reader = open(nodes)?;
    let edge_reader = open(edges)?;
    load_graph(node_reader, edge_reader)
        .map(|(g, _)| g)
        .map_err(|source| {
            let path = match &source {
                GraphError::MalformedRecord {
                    kind: crate::graph::RecordKind::Node,
                    ..
                } => nodes,
                _ => edges,
            };
            ArtifactError::Graph {
                path: path.to_path_buf(),
                source,
            }
        })
}

pub fn read_corpus(path: &Path) -> Result<CorpusIndex, ArtifactError> {
    let docs: Vec<Document> = read_jsonl(path)?;
    index_corpus(docs).map_err(|source| ArtifactError::Corpus {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_watchlist(path: &Path) -> Result<Vec<NodeId>, ArtifactError> {
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(NodeId::from)
        .collect())
}

/// A run directory produced by the pipeline stages.
#[derive(Clone, Debug)]
pub struct RunDir {
    root: PathBuf,
}

impl RunDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        RunDir { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write_graph(&self, g: &PropertyGraph) -> Result<(), ArtifactError> {
        write_jsonl(&self.path(GRAPH_NODES), g.nodes())?;
        write_jsonl(&self.path(GRAPH_EDGES), g.edges())
    }

    pub fn graph(&self) -> Result<PropertyGraph, ArtifactError> {
        read_graph_files(&self.path(GRAPH_NODES), &self.path(GRAPH_EDGES))
    }

    pub fn model(&self) -> Result<ScorerModel, ArtifactError> {
        let path = self.path(MODEL);
        let model: ScorerModel = read_json(&path)?;
        model
            .validate()
            .map_err(|source| ArtifactError::Model { path, source })?;
        Ok(model)
    }

    pub fn samples(&self) -> Result<Vec<SampleRecord>, ArtifactError> {
        read_jsonl(&self.path(SAMPLES))
    }

    pub fn predictions(&self) -> Result<Vec<LinkPrediction>, ArtifactError> {
        read_jsonl(&self.path(PREDICTIONS))
    }

    /// Rebuild the explainer suite from the graph, model, samples and
    /// predictions in this directory.
    pub fn explainer_suite(
        &self,
        corpus: Option<CorpusIndex>,
        settings: ExplainSettings,
    ) -> Result<(ExplainerSuite, Vec<LinkPrediction>), ArtifactError> {
        let graph = self.graph()?;
        let model = self.model()?;
        let background: Vec<_> = self
            .samples()?
            .into_iter()
            .map(SampleRecord::into_sample)
            .collect();
        let predictions = self.predictions()?;
        let pairs: Vec<(NodeId, NodeId)> = predictions
            .iter()
            .map(|p| (p.u.clone(), p.v.clone()))
            .collect();
        let suite = ExplainerSuite::build(graph, model, corpus, &background, &pairs, settings)?;
        Ok((suite, predictions))
    }
}
