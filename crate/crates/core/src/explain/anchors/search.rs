//! Beam search for anchor rules.
//!
//! A rule is a conjunction of predicates over the explained instance's own
//! feature values. Its precision is estimated by Monte-Carlo: every feature
//! is drawn independently from its empirical marginal, restricted to values
//! that satisfy the rule's predicate on that feature, and the classifier's
//! agreement with its prediction on the explained instance is counted.

use std::cmp::Ordering;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{AnchorsError, Classifier, FeatureKind, FeatureSchema};
use crate::rng::{stage_rng, StageRng};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Comparator {
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">=")]
    Ge,
}

impl Comparator {
    pub fn holds(self, value: i64, constant: i64) -> bool {
        match self {
            Comparator::Eq => value == constant,
            Comparator::Le => value <= constant,
            Comparator::Ge => value >= constant,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Comparator::Eq => "=",
            Comparator::Le => "<=",
            Comparator::Ge => ">=",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Predicate {
    pub feature: String,
    #[serde(rename = "op")]
    pub comparator: Comparator,
    pub value: i64,
    /// Rendered form such as `distance_bucket <= 2` or `same_attribute[city] = true`.
    pub text: String,
}

impl Predicate {
    pub fn new(schema: &FeatureSchema, feature: usize, comparator: Comparator, value: i64) -> Self {
        let text = format!(
            "{} {} {}",
            schema.name(feature),
            comparator.symbol(),
            schema.render_value(feature, value)
        );
        Predicate {
            feature: schema.name(feature).to_string(),
            comparator,
            value,
            text,
        }
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

/// Empirical distribution the perturbations are drawn from.
#[derive(Clone, Debug)]
pub struct PerturbationSpace {
    schema: FeatureSchema,
    rows: Vec<Vec<i64>>,
    marginals: Vec<Vec<i64>>,
}

impl PerturbationSpace {
    pub fn new(schema: FeatureSchema, rows: Vec<Vec<i64>>) -> Result<Self, AnchorsError> {
        if rows.is_empty() {
            return Err(AnchorsError::NoInstances);
        }
        if let Some(bad) = rows.iter().find(|r| r.len() != schema.len()) {
            return Err(AnchorsError::SchemaMismatch {
                expected: schema.len(),
                got: bad.len(),
            });
        }
        let marginals = (0..schema.len())
            .map(|f| rows.iter().map(|r| r[f]).collect())
            .collect();
        Ok(PerturbationSpace {
            schema,
            rows,
            marginals,
        })
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn rows(&self) -> &[Vec<i64>] {
        &self.rows
    }

    /// Marginal sample pool of a feature (with multiplicity).
    pub fn marginal(&self, feature: usize) -> &[i64] {
        &self.marginals[feature]
    }

    fn compile(&self, rule: &[Predicate]) -> Result<Vec<(usize, Comparator, i64)>, AnchorsError> {
        rule.iter()
            .map(|p| {
                self.schema
                    .position(&p.feature)
                    .map(|f| (f, p.comparator, p.value))
                    .ok_or_else(|| AnchorsError::UnknownFeature(p.feature.clone()))
            })
            .collect()
    }

    /// Fraction of background rows satisfying every predicate.
    pub fn coverage(&self, rule: &[Predicate]) -> Result<f64, AnchorsError> {
        let compiled = self.compile(rule)?;
        let hits = self
            .rows
            .iter()
            .filter(|r| compiled.iter().all(|&(f, c, v)| c.holds(r[f], v)))
            .count();
        Ok(hits as f64 / self.rows.len() as f64)
    }

    /// Per-feature sampling pools under the rule.
    pub fn pools(&self, rule: &[Predicate]) -> Result<Vec<Vec<i64>>, AnchorsError> {
        let compiled = self.compile(rule)?;
        Ok((0..self.schema.len())
            .map(|f| {
                self.marginals[f]
                    .iter()
                    .copied()
                    .filter(|&x| {
                        compiled
                            .iter()
                            .filter(|(g, _, _)| *g == f)
                            .all(|&(_, c, v)| c.holds(x, v))
                    })
                    .collect()
            })
            .collect())
    }
}

/// Monte-Carlo precision of `rule` with respect to `target`.
pub fn estimate_precision(
    classifier: &dyn Classifier,
    space: &PerturbationSpace,
    rule: &[Predicate],
    target: bool,
    samples: usize,
    rng: &mut StageRng,
) -> Result<f64, AnchorsError> {
    let pools = space.pools(rule)?;
    if let Some(f) = pools.iter().position(Vec::is_empty) {
        return Err(AnchorsError::EmptyPool(space.schema.name(f).to_string()));
    }
    let mut x = vec![0; pools.len()];
    let mut hits = 0usize;
    for _ in 0..samples {
        for (slot, pool) in x.iter_mut().zip(&pools) {
            *slot = pool[rng.random_range(0..pool.len())];
        }
        if classifier.predict(&x) == target {
            hits += 1;
        }
    }
    Ok(hits as f64 / samples.max(1) as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnchorConfig {
    /// Precision target.
    pub tau: f64,
    pub beam: usize,
    /// Perturbation samples per precision estimate.
    pub budget: usize,
    /// Total perturbation samples for one search.
    pub max_total_samples: usize,
    pub seed: u64,
}

impl Default for AnchorConfig {
    fn default() -> Self {
        AnchorConfig {
            tau: 0.90,
            beam: 3,
            budget: 2000,
            max_total_samples: 1_000_000,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnchorsRule {
    /// Predicates in the order they were added.
    pub predicates: Vec<Predicate>,
    pub precision: f64,
    pub coverage: f64,
    pub samples_used: usize,
    pub fidelity_of_surrogate: Option<f64>,
    /// The class the rule anchors.
    pub predicted_link: bool,
    /// The search stopped on `max_total_samples` rather than converging.
    pub budget_exhausted: bool,
    pub reached_target: bool,
}

impl AnchorsRule {
    /// Plain reading of the rule, e.g. "these two nodes will have a link
    /// 52.3% of the time if common_neighbors >= 2".
    pub fn sentence(&self) -> String {
        let verb = if self.predicted_link { "will have" } else { "will not have" };
        let pct = format!("{:.1}%", self.precision * 100.0);
        if self.predicates.is_empty() {
            return format!("these two nodes {verb} a link {pct} of the time");
        }
        let conditions: Vec<&str> = self.predicates.iter().map(|p| p.text.as_str()).collect();
        format!(
            "these two nodes {verb} a link {pct} of the time if {}",
            conditions.join(" and ")
        )
    }
}

#[derive(Clone, Debug)]
struct Candidate {
    rule: Vec<Predicate>,
    key: Vec<String>,
    precision: f64,
    coverage: f64,
}

fn rank(a: &Candidate, b: &Candidate) -> Ordering {
    b.precision
        .partial_cmp(&a.precision)
        .unwrap_or(Ordering::Equal)
        .then_with(|| b.coverage.partial_cmp(&a.coverage).unwrap_or(Ordering::Equal))
        .then_with(|| a.key.cmp(&b.key))
}

fn sorted_key(rule: &[Predicate]) -> Vec<String> {
    let mut key: Vec<String> = rule.iter().map(|p| p.text.clone()).collect();
    key.sort();
    key
}

/// Predicates the explained instance satisfies: `=` for every feature plus
/// `<=` and `>=` for ordinal ones.
pub fn candidate_predicates(schema: &FeatureSchema, instance: &[i64]) -> Vec<Predicate> {
    let mut out = Vec::new();
    for (f, &value) in instance.iter().enumerate() {
        out.push(Predicate::new(schema, f, Comparator::Eq, value));
        if schema.kind(f) != FeatureKind::Bool {
            out.push(Predicate::new(schema, f, Comparator::Le, value));
            out.push(Predicate::new(schema, f, Comparator::Ge, value));
        }
    }
    out
}

/// Search for a rule that pins the classifier's prediction on `instance`.
pub fn explain_anchor(
    classifier: &dyn Classifier,
    space: &PerturbationSpace,
    instance: &[i64],
    config: &AnchorConfig,
) -> Result<AnchorsRule, AnchorsError> {
    let schema = space.schema();
    if schema.is_empty() {
        return Err(AnchorsError::EmptyRuleSpace);
    }
    if instance.len() != schema.len() {
        return Err(AnchorsError::SchemaMismatch {
            expected: schema.len(),
            got: instance.len(),
        });
    }
    let target = classifier.predict(instance);
    let mut rng = stage_rng(config.seed, "anchors-search");
    let samples = config.budget.max(1);
    let mut spent = samples;

    let mut best = Candidate {
        rule: Vec::new(),
        key: Vec::new(),
        precision: estimate_precision(classifier, space, &[], target, samples, &mut rng)?,
        coverage: 1.0,
    };
    let mut exhausted = false;
    let mut beam = vec![best.clone()];
    let predicates = candidate_predicates(schema, instance);

    while best.precision < config.tau {
        let mut seen = std::collections::HashSet::new();
        let mut children = Vec::new();
        for parent in &beam {
            for p in &predicates {
                if parent.rule.iter().any(|q| q.feature == p.feature) {
                    continue;
                }
                let mut rule = parent.rule.clone();
                rule.push(p.clone());
                let key = sorted_key(&rule);
                if seen.insert(key.clone()) {
                    children.push((parent.coverage, rule, key));
                }
            }
        }
        if children.is_empty() {
            break;
        }
        if spent + children.len() * samples > config.max_total_samples {
            exhausted = true;
            break;
        }
        let mut scored = Vec::with_capacity(children.len());
        for (parent_coverage, rule, key) in children {
            let coverage = space.coverage(&rule)?;
            debug_assert!(coverage <= parent_coverage);
            let precision = estimate_precision(classifier, space, &rule, target, samples, &mut rng)?;
            spent += samples;
            scored.push(Candidate {
                rule,
                key,
                precision,
                coverage,
            });
        }
        scored.sort_by(rank);
        if scored[0].precision <= best.precision {
            break;
        }
        best = scored[0].clone();
        scored.truncate(config.beam.max(1));
        beam = scored;
    }

    Ok(AnchorsRule {
        reached_target: best.precision >= config.tau,
        predicates: best.rule,
        precision: best.precision,
        coverage: best.coverage,
        samples_used: samples,
        fidelity_of_surrogate: None,
        predicted_link: target,
        budget_exhausted: exhausted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binary_schema(n: usize) -> FeatureSchema {
        FeatureSchema::new(
            (0..n)
                .map(|i| (format!("f{i}"), FeatureKind::Bool))
                .collect(),
        )
    }

    #[test]
    fn constant_classifier_gets_empty_rule() {
        let space = PerturbationSpace::new(binary_schema(3), vec![vec![0, 1, 0], vec![1, 1, 1]]).unwrap();
        let always = |_: &[i64]| true;
        let rule = explain_anchor(&always, &space, &[0, 1, 0], &AnchorConfig::default()).unwrap();
        assert!(rule.predicates.is_empty());
        assert_eq!(rule.precision, 1.0);
        assert_eq!(rule.coverage, 1.0);
        assert!(rule.reached_target);
    }

    #[test]
    fn sentence_reports_low_precision_rules() {
        let schema = FeatureSchema::new(vec![
            ("common_neighbors".into(), FeatureKind::Count),
            ("same_attribute[city]".into(), FeatureKind::Bool),
        ]);
        let rule = AnchorsRule {
            predicates: vec![
                Predicate::new(&schema, 0, Comparator::Ge, 2),
                Predicate::new(&schema, 1, Comparator::Eq, 1),
            ],
            precision: 0.523,
            coverage: 0.1,
            samples_used: 2000,
            fidelity_of_surrogate: None,
            predicted_link: true,
            budget_exhausted: false,
            reached_target: false,
        };
        assert_eq!(
            rule.sentence(),
            "these two nodes will have a link 52.3% of the time if common_neighbors >= 2 and same_attribute[city] = true"
        );
    }

    #[test]
    fn single_feature_rule() {
        let rows: Vec<Vec<i64>> = (0..8).map(|i| vec![i & 1, (i >> 1) & 1, (i >> 2) & 1]).collect();
        let space = PerturbationSpace::new(binary_schema(3), rows).unwrap();
        let clf = |x: &[i64]| x[1] == 1;
        let rule = explain_anchor(&clf, &space, &[0, 1, 0], &AnchorConfig::default()).unwrap();
        assert_eq!(rule.predicates.len(), 1);
        assert_eq!(rule.predicates[0].text, "f1 = true");
        assert_eq!(rule.precision, 1.0);
        assert_eq!(rule.coverage, 0.5);
    }

    #[test]
    fn empty_schema() {
        let space = PerturbationSpace::new(FeatureSchema::new(vec![]), vec![vec![]]).unwrap();
        assert!(matches!(
            explain_anchor(&|_: &[i64]| true, &space, &[], &AnchorConfig::default()),
            Err(AnchorsError::EmptyRuleSpace)
        ));
    }

    #[test]
    fn budget_cap_flags_rule() {
        let rows: Vec<Vec<i64>> = (0..8).map(|i| vec![i & 1, (i >> 1) & 1, (i >> 2) & 1]).collect();
        let space = PerturbationSpace::new(binary_schema(3), rows).unwrap();
        let clf = |x: &[i64]| x[0] == 1 && x[1] == 1 && x[2] == 1;
        let config = AnchorConfig {
            max_total_samples: 2500,
            ..AnchorConfig::default()
        };
        let rule = explain_anchor(&clf, &space, &[1, 1, 1], &config).unwrap();
        assert!(rule.budget_exhausted);
        assert!(rule.predicates.is_empty());
    }

    #[test]
    fn predicate_serialization_uses_symbols() {
        let schema = binary_schema(1);
        let p = Predicate::new(&schema, 0, Comparator::Le, 1);
        let json = serde_json::to_string(&p).unwrap();
        assert!(json.contains("\"op\":\"<=\""));
    }
}
