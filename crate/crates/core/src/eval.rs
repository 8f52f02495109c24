//! ROC AUC across seeds and annotator agreement with explanations.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::explain::Technique;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("AUC needs both classes; got {positives} positives and {negatives} negatives")]
    SingleClass { positives: usize, negatives: usize },
    #[error("score at position {0} is not finite")]
    NonFiniteScore(usize),
    #[error("seed {seed}: {source}")]
    Seed {
        seed: u64,
        #[source]
        source: Box<EvalError>,
    },
    #[error("a report needs at least two seeds, got {0}")]
    TooFewSeeds(usize),
    #[error("duplicate verdict for link {link_id}, technique {technique}, annotator {annotator}")]
    DuplicateVerdict {
        link_id: String,
        technique: Technique,
        annotator: String,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoredLabel {
    pub score: f64,
    pub label: bool,
}

impl ScoredLabel {
    pub fn new(score: f64, label: bool) -> Self {
        ScoredLabel { score, label }
    }
}

/// Probability that a random positive outranks a random negative, ties
/// counted one half, via the Mann–Whitney rank sum with average ranks.
pub fn roc_auc(items: &[ScoredLabel]) -> Result<f64, EvalError> {
    if let Some(i) = items.iter().position(|it| !it.score.is_finite()) {
        return Err(EvalError::NonFiniteScore(i));
    }
    let positives = items.iter().filter(|it| it.label).count();
    let negatives = items.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(EvalError::SingleClass {
            positives,
            negatives,
        });
    }
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.sort_by(|&a, &b| {
        items[a]
            .score
            .partial_cmp(&items[b].score)
            .unwrap_or(Ordering::Equal)
    });
    let mut positive_rank_sum = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && items[order[end]].score == items[order[start]].score {
            end += 1;
        }
        // Ranks start..end (1-based start+1..=end) share their mean.
        let mean_rank = (start + 1 + end) as f64 / 2.0;
        let tied_positives = order[start..end].iter().filter(|&&i| items[i].label).count();
        positive_rank_sum += mean_rank * tied_positives as f64;
        start = end;
    }
    let p = positives as f64;
    let u = positive_rank_sum - p * (p + 1.0) / 2.0;
    Ok(u / (p * negatives as f64))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedAuc {
    pub seed: u64,
    pub auc: f64,
}

/// Mean and population standard deviation of per-seed AUCs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub dataset: String,
    pub model: String,
    pub runs: Vec<SeedAuc>,
    pub mean: f64,
    pub std: f64,
}

pub fn mean_and_population_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

impl EvaluationReport {
    pub fn from_runs(dataset: &str, model: &str, runs: Vec<SeedAuc>) -> Self {
        let aucs: Vec<f64> = runs.iter().map(|r| r.auc).collect();
        let (mean, std) = mean_and_population_std(&aucs);
        EvaluationReport {
            dataset: dataset.to_string(),
            model: model.to_string(),
            runs,
            mean,
            std,
        }
    }
}

/// Score every seed with `run` and summarize.
pub fn multi_seed_report<F>(
    dataset: &str,
    model: &str,
    seeds: &[u64],
    mut run: F,
) -> Result<EvaluationReport, EvalError>
where
    F: FnMut(u64) -> Vec<ScoredLabel>,
{
    if seeds.len() < 2 {
        return Err(EvalError::TooFewSeeds(seeds.len()));
    }
    let runs = seeds
        .iter()
        .map(|&seed| {
            roc_auc(&run(seed))
                .map(|auc| SeedAuc { seed, auc })
                .map_err(|e| EvalError::Seed {
                    seed,
                    source: Box::new(e),
                })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(EvaluationReport::from_runs(dataset, model, runs))
}

pub const STD_FOOTER: &str = "Std. Dev. is the population standard deviation over seeds: sqrt(sum((auc_i - mean)^2) / N).";

/// Aligned text table with columns Dataset, Model, ROC AUC, Std. Dev.
pub fn render_auc_table(reports: &[EvaluationReport]) -> String {
    let header = ["Dataset", "Model", "ROC AUC", "Std. Dev."];
    let rows: Vec<[String; 4]> = reports
        .iter()
        .map(|r| {
            [
                r.dataset.clone(),
                r.model.clone(),
                format!("{:.4}", r.mean),
                format!("{:.4}", r.std),
            ]
        })
        .collect();
    let mut out = render_table(&header, &rows, &[false, false, true, true]);
    out.push_str(STD_FOOTER);
    out.push('\n');
    out
}

fn render_table<const N: usize>(header: &[&str; N], rows: &[[String; N]], right: &[bool; N]) -> String {
    let mut widths = header.map(|h| h.chars().count());
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: Vec<&str>| {
        let mut s = String::new();
        for (i, cell) in cells.iter().enumerate() {
            if i > 0 {
                s.push_str("  ");
            }
            let pad = widths[i] - cell.chars().count();
            if right[i] {
                s.push_str(&" ".repeat(pad));
                s.push_str(cell);
            } else {
                s.push_str(cell);
                if i + 1 < N {
                    s.push_str(&" ".repeat(pad));
                }
            }
        }
        s.push('\n');
        s
    };
    let mut out = line(header.to_vec());
    let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
    out.push_str(&line(rule.iter().map(String::as_str).collect()));
    for row in rows {
        out.push_str(&line(row.iter().map(String::as_str).collect()));
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Agree,
    Disagree,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedbackRecord {
    pub link_id: String,
    pub technique: Technique,
    pub annotator: String,
    pub verdict: Verdict,
    pub timestamp: String,
}

impl FeedbackRecord {
    pub fn key(&self) -> (String, Technique, String) {
        (self.link_id.clone(), self.technique, self.annotator.clone())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TechniqueAgreement {
    pub technique: Technique,
    pub agreements: usize,
    pub total: usize,
    /// `None` when no verdicts were recorded.
    pub rate: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub techniques: Vec<TechniqueAgreement>,
}

impl AgreementReport {
    pub fn get(&self, technique: Technique) -> &TechniqueAgreement {
        self.techniques
            .iter()
            .find(|t| t.technique == technique)
            .expect("report lists every technique")
    }

    pub fn render(&self) -> String {
        let header = ["Technique", "Agreed", "Total", "Rate"];
        let rows: Vec<[String; 4]> = self
            .techniques
            .iter()
            .map(|t| {
                [
                    t.technique.to_string(),
                    t.agreements.to_string(),
                    t.total.to_string(),
                    t.rate.map_or_else(|| "-".to_string(), |r| format!("{:.2}", r)),
                ]
            })
            .collect();
        render_table(&header, &rows, &[false, true, true, true])
    }
}

/// Pooled agreement counts per technique. Any repeated
/// (link, technique, annotator) key is an error.
pub fn agreement_report(log: &[FeedbackRecord]) -> Result<AgreementReport, EvalError> {
    let mut seen = HashSet::new();
    let mut counts: BTreeMap<Technique, (usize, usize)> =
        Technique::ALL.iter().map(|&t| (t, (0, 0))).collect();
    for rec in log {
        if !seen.insert(rec.key()) {
            return Err(EvalError::DuplicateVerdict {
                link_id: rec.link_id.clone(),
                technique: rec.technique,
                annotator: rec.annotator.clone(),
            });
        }
        let entry = counts.get_mut(&rec.technique).expect("closed technique set");
        entry.1 += 1;
        if rec.verdict == Verdict::Agree {
            entry.0 += 1;
        }
    }
    Ok(AgreementReport {
        techniques: Technique::ALL
            .iter()
            .map(|&technique| {
                let (agreements, total) = counts[&technique];
                TechniqueAgreement {
                    technique,
                    agreements,
                    total,
                    rate: (total > 0).then(|| agreements as f64 / total as f64),
                }
            })
            .collect(),
    })
}
