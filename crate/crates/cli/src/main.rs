use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};

use lpx_core::artifacts::{self, ArtifactError, RunDir};
use lpx_core::eval::{agreement_report, render_auc_table, FeedbackRecord};
use lpx_core::explain::{ExplanationEnvelope, LinkRef, Technique};
use lpx_core::graph::{connected_components, PropertyGraph};
use lpx_core::pipeline::{evaluate_seeds, prepare, train_scorer, PipelineError, RunConfig};
use lpx_core::predictor::{predict_watchlist, PredictorError};
use lpx_core::sampler::SampleRecord;
use lpx_core::synth::{community_graph, news_corpus, CommunitySpec};
use lpx_service::{AppState, FeedbackLog, Snapshot};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(name = "lpx", version, about = "Explainable link prediction over property graphs")]
struct Cli {
    /// TOML file with run settings; command-line flags take precedence.
    #[arg(long, global = true, env = "LPX_CONFIG")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load node and edge files, drop small components, write the graph.
    Ingest {
        #[command(flatten)]
        input: GraphInput,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Hold out test links and sample negatives.
    Split {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Train the link scorer on the split.
    Train {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Score links from watchlist nodes.
    Predict {
        /// One node id per line.
        #[arg(long)]
        watchlist: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Explain every stored prediction with all three techniques.
    Explain {
        /// Line-delimited documents for verification.
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Multi-seed ROC AUC report, plus an agreement report from a feedback log.
    Eval {
        #[arg(long)]
        feedback: Option<PathBuf>,
        /// Dataset name shown in the report.
        #[arg(long, default_value = "graph")]
        dataset: String,
        #[command(flatten)]
        run: RunArgs,
    },
    /// All stages from ingest to eval.
    Run {
        #[command(flatten)]
        input: GraphInput,
        #[arg(long)]
        watchlist: PathBuf,
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        feedback: Option<PathBuf>,
        #[arg(long, default_value = "graph")]
        dataset: String,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Serve the review API over a run directory.
    Serve {
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Append-only feedback log; created if missing.
        #[arg(long, env = "LPX_FEEDBACK_LOG")]
        feedback_log: PathBuf,
        #[arg(long, env = "LPX_ADDR", default_value = "127.0.0.1:8080")]
        addr: String,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Write a synthetic two-community dataset.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 120)]
        docs: usize,
    },
}

#[derive(Args)]
struct GraphInput {
    #[arg(long)]
    nodes: PathBuf,
    #[arg(long)]
    edges: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    /// Run directory holding every stage's artifacts.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    min_component_size: Option<usize>,
    #[arg(long)]
    split_ratio: Option<f64>,
    /// Number of anchor nodes.
    #[arg(long)]
    anchors: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    top_n: Option<usize>,
}

struct Failure {
    code: u8,
    stage: &'static str,
    error: anyhow::Error,
}

type Stage<T> = Result<T, Failure>;

fn data(stage: &'static str) -> impl FnOnce(anyhow::Error) -> Failure {
    move |error| Failure {
        code: EXIT_DATA,
        stage,
        error,
    }
}

fn usage(stage: &'static str, error: anyhow::Error) -> Failure {
    Failure {
        code: EXIT_USAGE,
        stage,
        error,
    }
}

fn artifact(stage: &'static str) -> impl FnOnce(ArtifactError) -> Failure {
    move |e| match e {
        ArtifactError::Pipeline(p) => pipeline(stage)(p),
        other => data(stage)(other.into()),
    }
}

fn pipeline(stage: &'static str) -> impl FnOnce(PipelineError) -> Failure {
    move |e| {
        let code = match &e {
            PipelineError::Predictor(
                PredictorError::NonFiniteLoss { .. } | PredictorError::DimensionMismatch { .. },
            ) => EXIT_RUNTIME,
            _ => EXIT_DATA,
        };
        Failure {
            code,
            stage,
            error: e.into(),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("lpx {}: {:#}", f.stage, f.error);
            ExitCode::from(f.code)
        }
    }
}

/// Timestamp recorded in artifacts: `SOURCE_DATE_EPOCH` when set, so that
/// reruns stay byte-identical, otherwise the Unix epoch.
fn artifact_timestamp() -> Stage<String> {
    let secs = match std::env::var("SOURCE_DATE_EPOCH") {
        Ok(v) => v
            .trim()
            .parse::<i64>()
            .map_err(|_| usage("config", anyhow!("SOURCE_DATE_EPOCH must be an integer, got `{v}`")))?,
        Err(_) => 0,
    };
    let t = chrono::DateTime::from_timestamp(secs, 0)
        .ok_or_else(|| usage("config", anyhow!("SOURCE_DATE_EPOCH out of range")))?;
    Ok(t.to_rfc3339_opts(chrono::SecondsFormat::Secs, true))
}

fn load_config(file: Option<&Path>, run: &RunArgs) -> Stage<RunConfig> {
    let mut cfg = match file {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("{}: cannot read config", path.display()))
                .map_err(|e| usage("config", e))?;
            toml::from_str(&text)
                .with_context(|| format!("{}: invalid config", path.display()))
                .map_err(|e| usage("config", e))?
        }
        None => RunConfig::default(),
    };
    let hp = &mut cfg.hyperparameters;
    if let Some(v) = run.seed {
        hp.seed = v;
    }
    if let Some(v) = run.anchors {
        hp.anchor_count = v;
    }
    if let Some(v) = run.epochs {
        hp.epochs = v;
    }
    if let Some(v) = run.learning_rate {
        hp.learning_rate = v;
    }
    if let Some(v) = run.threshold {
        cfg.threshold = v;
    }
    if let Some(v) = run.min_component_size {
        cfg.min_component_size = v;
    }
    if let Some(v) = run.split_ratio {
        cfg.split_ratio = v;
    }
    if let Some(v) = run.top_n {
        cfg.top_n = v;
    }
    if !(0.0..=1.0).contains(&cfg.threshold) {
        return Err(usage("config", anyhow!("threshold must be within [0, 1]")));
    }
    if !(cfg.split_ratio > 0.0 && cfg.split_ratio < 1.0) {
        return Err(usage("config", anyhow!("split ratio must be within (0, 1)")));
    }
    Ok(cfg)
}

fn dispatch(cli: Cli) -> Stage<()> {
    let config_file = cli.config.as_deref();
    match cli.command {
        Command::Ingest { input, run } => {
            let cfg = load_config(config_file, &run)?;
            ingest(&input, &RunDir::new(&run.out), &cfg)
        }
        Command::Split { run } => {
            let cfg = load_config(config_file, &run)?;
            split(&RunDir::new(&run.out), &cfg)
        }
        Command::Train { run } => {
            let cfg = load_config(config_file, &run)?;
            train(&RunDir::new(&run.out), &cfg)
        }
        Command::Predict { watchlist, run } => {
            let cfg = load_config(config_file, &run)?;
            predict(&RunDir::new(&run.out), &cfg, &watchlist)
        }
        Command::Explain { corpus, run } => {
            let cfg = load_config(config_file, &run)?;
            explain(&RunDir::new(&run.out), &cfg, corpus.as_deref())
        }
        Command::Eval {
            feedback,
            dataset,
            run,
        } => {
            let cfg = load_config(config_file, &run)?;
            eval(&RunDir::new(&run.out), &cfg, &dataset, feedback.as_deref())
        }
        Command::Run {
            input,
            watchlist,
            corpus,
            feedback,
            dataset,
            run,
        } => {
            let cfg = load_config(config_file, &run)?;
            let dir = RunDir::new(&run.out);
            ingest(&input, &dir, &cfg)?;
            split(&dir, &cfg)?;
            train(&dir, &cfg)?;
            predict(&dir, &cfg, &watchlist)?;
            explain(&dir, &cfg, corpus.as_deref())?;
            eval(&dir, &cfg, &dataset, feedback.as_deref())
        }
        Command::Serve {
            corpus,
            feedback_log,
            addr,
            run,
        } => {
            let cfg = load_config(config_file, &run)?;
            serve(&RunDir::new(&run.out), &cfg, corpus.as_deref(), &feedback_log, &addr)
        }
        Command::Synth { out, seed, docs } => synth(&out, seed, docs),
    }
}

fn write_config(dir: &RunDir, cfg: &RunConfig, stage: &'static str) -> Stage<()> {
    artifacts::write_json(&dir.path(artifacts::RUN_CONFIG), cfg).map_err(artifact(stage))
}

fn ingest(input: &GraphInput, dir: &RunDir, cfg: &RunConfig) -> Stage<()> {
    const STAGE: &str = "ingest";
    let node_reader = artifacts::open(&input.nodes).map_err(artifact(STAGE))?;
    let edge_reader = artifacts::open(&input.edges).map_err(artifact(STAGE))?;
    let (g, report) = lpx_core::graph::load_graph(node_reader, edge_reader)
        .with_context(|| format!("{} / {}", input.nodes.display(), input.edges.display()))
        .map_err(data(STAGE))?;
    let comps = connected_components(&g, cfg.min_component_size);
    if comps.graphs.is_empty() {
        return Err(pipeline(STAGE)(PipelineError::NoComponents(cfg.min_component_size)));
    }
    let kept = PropertyGraph::disjoint_union(&comps.graphs)
        .map_err(|e| data(STAGE)(e.into()))?;
    dir.write_graph(&kept).map_err(artifact(STAGE))?;
    let summary = serde_json::json!({
        "nodes_read": report.nodes,
        "edges_read": report.edges,
        "duplicate_edges_dropped": report.dropped,
        "min_component_size": cfg.min_component_size,
        "components_kept": comps.graphs.len(),
        "components_dropped": comps.filtered_components,
        "nodes_dropped": comps.filtered_nodes,
        "nodes_kept": kept.node_count(),
        "edges_kept": kept.edge_count(),
    });
    artifacts::write_json(&dir.path(artifacts::INGEST_REPORT), &summary).map_err(artifact(STAGE))?;
    write_config(dir, cfg, STAGE)?;
    eprintln!(
        "ingest: kept {} nodes / {} edges in {} components",
        kept.node_count(),
        kept.edge_count(),
        comps.graphs.len()
    );
    Ok(())
}

fn split_records(dir: &RunDir, cfg: &RunConfig, stage: &'static str) -> Stage<(lpx_core::pipeline::Prepared, Vec<SampleRecord>)> {
    let g = dir.graph().map_err(artifact(stage))?;
    let prepared = prepare(&g, cfg.min_component_size, cfg.split_ratio, cfg.hyperparameters.seed)
        .map_err(pipeline(stage))?;
    let records: Vec<SampleRecord> = prepared.splits.iter().flat_map(|s| s.records()).collect();
    Ok((prepared, records))
}

fn split(dir: &RunDir, cfg: &RunConfig) -> Stage<()> {
    const STAGE: &str = "split";
    let (_, records) = split_records(dir, cfg, STAGE)?;
    artifacts::write_jsonl(&dir.path(artifacts::SAMPLES), &records).map_err(artifact(STAGE))?;
    write_config(dir, cfg, STAGE)?;
    eprintln!("split: {} test samples", records.len());
    Ok(())
}

fn train(dir: &RunDir, cfg: &RunConfig) -> Stage<()> {
    const STAGE: &str = "train";
    let (prepared, records) = split_records(dir, cfg, STAGE)?;
    let stored = dir.samples().map_err(artifact(STAGE))?;
    if stored != records {
        return Err(data(STAGE)(anyhow!(
            "{} was not produced by this graph and seed; rerun `lpx split`",
            dir.path(artifacts::SAMPLES).display()
        )));
    }
    let model = train_scorer(&prepared, &cfg.hyperparameters).map_err(pipeline(STAGE))?;
    artifacts::write_json(&dir.path(artifacts::MODEL), &model).map_err(artifact(STAGE))?;
    write_config(dir, cfg, STAGE)?;
    eprintln!(
        "train: final loss {:.4} after {} epochs",
        model.training_log.last().copied().unwrap_or(f64::NAN),
        model.training_log.len()
    );
    Ok(())
}

fn predict(dir: &RunDir, cfg: &RunConfig, watchlist: &Path) -> Stage<()> {
    const STAGE: &str = "predict";
    let g = dir.graph().map_err(artifact(STAGE))?;
    let model = dir.model().map_err(artifact(STAGE))?;
    let members = artifacts::read_watchlist(watchlist).map_err(artifact(STAGE))?;
    let predictions = predict_watchlist(&model, &g, &members, cfg.threshold, cfg.top_n)
        .with_context(|| format!("{}", watchlist.display()))
        .map_err(data(STAGE))?;
    artifacts::write_jsonl(&dir.path(artifacts::PREDICTIONS), &predictions).map_err(artifact(STAGE))?;
    write_config(dir, cfg, STAGE)?;
    eprintln!("predict: {} links above threshold {}", predictions.len(), cfg.threshold);
    Ok(())
}

fn explain(dir: &RunDir, cfg: &RunConfig, corpus: Option<&Path>) -> Stage<()> {
    const STAGE: &str = "explain";
    let generated_at = artifact_timestamp()?;
    let index = corpus
        .map(artifacts::read_corpus)
        .transpose()
        .map_err(artifact(STAGE))?;
    let (suite, predictions) = dir
        .explainer_suite(index, cfg.explain_settings())
        .map_err(artifact(STAGE))?;
    let mut envelopes = Vec::new();
    let mut unavailable = Vec::new();
    for p in &predictions {
        let link = LinkRef::new(p.u.clone(), p.v.clone());
        for technique in Technique::ALL {
            match suite.explain(&p.u, &p.v, technique) {
                Ok(payload) => envelopes.push(ExplanationEnvelope::new(link.clone(), payload, generated_at.clone())),
                Err(e) => unavailable.push(serde_json::json!({
                    "link": link.id,
                    "technique": technique,
                    "reason": e.to_string(),
                })),
            }
        }
    }
    artifacts::write_jsonl(&dir.path(artifacts::EXPLANATIONS), &envelopes).map_err(artifact(STAGE))?;
    let summary = serde_json::json!({
        "predictions": predictions.len(),
        "explanations": envelopes.len(),
        "unavailable": unavailable,
        "surrogate_fidelity": suite.anchor_explainer().map(|a| a.surrogate.fidelity),
        "path_ranker": suite.path_ranker().map(|r| serde_json::json!({
            "version": r.version,
            "oob_accuracy": r.forest.oob_accuracy,
            "top_types": r.ranked_types().into_iter().take(5)
                .map(|(t, score)| serde_json::json!({"path_type": t.to_string(), "importance": score}))
                .collect::<Vec<_>>(),
        })),
    });
    artifacts::write_json(&dir.path(artifacts::EXPLAIN_REPORT), &summary).map_err(artifact(STAGE))?;
    write_config(dir, cfg, STAGE)?;
    eprintln!(
        "explain: {} explanations, {} unavailable",
        envelopes.len(),
        unavailable.len()
    );
    Ok(())
}

fn eval(dir: &RunDir, cfg: &RunConfig, dataset: &str, feedback: Option<&Path>) -> Stage<()> {
    const STAGE: &str = "eval";
    let g = dir.graph().map_err(artifact(STAGE))?;
    let report = evaluate_seeds(&g, cfg, dataset).map_err(pipeline(STAGE))?;
    artifacts::write_json(&dir.path(artifacts::EVAL_REPORT_JSON), &report).map_err(artifact(STAGE))?;
    let table = render_auc_table(std::slice::from_ref(&report));
    artifacts::write_bytes(&dir.path(artifacts::EVAL_REPORT_TEXT), table.as_bytes())
        .map_err(artifact(STAGE))?;
    print!("{table}");
    if let Some(path) = feedback {
        let log: Vec<FeedbackRecord> = artifacts::read_jsonl(path).map_err(artifact(STAGE))?;
        let agreement = agreement_report(&log)
            .with_context(|| format!("{}", path.display()))
            .map_err(data(STAGE))?;
        artifacts::write_json(&dir.path(artifacts::AGREEMENT_JSON), &agreement).map_err(artifact(STAGE))?;
        let text = agreement.render();
        artifacts::write_bytes(&dir.path(artifacts::AGREEMENT_TEXT), text.as_bytes())
            .map_err(artifact(STAGE))?;
        print!("{text}");
    }
    write_config(dir, cfg, STAGE)
}

fn serve(dir: &RunDir, cfg: &RunConfig, corpus: Option<&Path>, log: &Path, addr: &str) -> Stage<()> {
    const STAGE: &str = "serve";
    let index = corpus
        .map(artifacts::read_corpus)
        .transpose()
        .map_err(artifact(STAGE))?;
    let (suite, predictions) = dir
        .explainer_suite(index, cfg.explain_settings())
        .map_err(artifact(STAGE))?;
    let feedback = FeedbackLog::open(log).map_err(|e| data(STAGE)(e.into()))?;
    if feedback.discarded_tail > 0 {
        eprintln!(
            "serve: dropped {} bytes of an interrupted write at the end of {}",
            feedback.discarded_tail,
            log.display()
        );
    }
    let loaded_at = chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true);
    let state = AppState::new(Snapshot::new(suite, predictions, loaded_at), feedback);
    let runtime = tokio::runtime::Runtime::new().map_err(|e| runtime_failure(STAGE, e.into()))?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .with_context(|| format!("cannot listen on {addr}"))
            .map_err(|e| runtime_failure(STAGE, e))?;
        let local = listener.local_addr().map_err(|e| runtime_failure(STAGE, e.into()))?;
        eprintln!("serve: listening on http://{local}");
        lpx_service::serve(listener, state, async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| runtime_failure(STAGE, e.into()))
    })
}

fn runtime_failure(stage: &'static str, error: anyhow::Error) -> Failure {
    Failure {
        code: EXIT_RUNTIME,
        stage,
        error,
    }
}

fn synth(out: &Path, seed: u64, docs: usize) -> Stage<()> {
    const STAGE: &str = "synth";
    let cg = community_graph(&CommunitySpec::default(), seed);
    // A small island that the component filter is expected to drop.
    let mut nodes = cg.graph.nodes().to_vec();
    let mut edges = cg.graph.edges().to_vec();
    for i in 0..4 {
        nodes.push(lpx_core::graph::Node::new(format!("x{i}"), lpx_core::graph::Label::Person));
    }
    for i in 0..3 {
        edges.push(lpx_core::graph::Edge::new(&format!("x{i}"), &format!("x{}", i + 1), "knows"));
    }
    let corpus = news_corpus(&cg.graph, docs, seed);
    let w = |name: &str| out.join(name);
    artifacts::write_jsonl(&w("nodes.jsonl"), &nodes).map_err(artifact(STAGE))?;
    artifacts::write_jsonl(&w("edges.jsonl"), &edges).map_err(artifact(STAGE))?;
    artifacts::write_jsonl(&w("corpus.jsonl"), &corpus).map_err(artifact(STAGE))?;
    let watchlist: String = ["p000", "p001", "p060", "p061"]
        .iter()
        .map(|id| format!("{id}\n"))
        .collect();
    artifacts::write_bytes(&w("watchlist.txt"), watchlist.as_bytes()).map_err(artifact(STAGE))?;
    eprintln!("synth: wrote {} nodes, {} edges, {} documents", nodes.len(), edges.len(), corpus.len());
    Ok(())
}
