//! Depth-limited information-gain decision tree used as the interpretable
//! surrogate of the link scorer.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{AnchorsError, FeatureSchema};
use crate::rng::stage_rng;

pub const DEFAULT_MAX_DEPTH: usize = 4;

/// Anything that maps a feature vector to a link / no-link decision.
pub trait Classifier {
    fn predict(&self, x: &[i64]) -> bool;
}

impl<F: Fn(&[i64]) -> bool> Classifier for F {
    fn predict(&self, x: &[i64]) -> bool {
        self(x)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum TreeNode {
    Leaf {
        prediction: bool,
        samples: usize,
        positives: usize,
    },
    /// `x[feature] <= threshold` goes left.
    Split {
        feature: usize,
        threshold: i64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

impl TreeNode {
    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn predict(&self, x: &[i64]) -> bool {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { prediction, .. } => return *prediction,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => node = if x[*feature] <= *threshold { left } else { right },
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Surrogate {
    pub schema: FeatureSchema,
    pub root: TreeNode,
    pub max_depth: usize,
    /// Agreement with the predictor on the held-out 20%.
    pub fidelity: f64,
    /// Agreement on the instances the tree was grown from.
    pub train_fidelity: f64,
    pub holdout_size: usize,
    /// Labels had one class only; the tree is a constant.
    pub single_class: bool,
}

impl Classifier for Surrogate {
    fn predict(&self, x: &[i64]) -> bool {
        self.root.predict(x)
    }
}

fn entropy(pos: usize, n: usize) -> f64 {
    if n == 0 || pos == 0 || pos == n {
        return 0.0;
    }
    let p = pos as f64 / n as f64;
    -(p * p.log2() + (1.0 - p) * (1.0 - p).log2())
}

/// Majority label; ties go to "no link".
fn majority(pos: usize, n: usize) -> bool {
    2 * pos > n
}

struct Grower<'a> {
    x: &'a [Vec<i64>],
    y: &'a [bool],
    order: Vec<usize>,
    max_depth: usize,
}

impl Grower<'_> {
    fn grow(&self, rows: &[usize], depth: usize) -> TreeNode {
        let n = rows.len();
        let pos = rows.iter().filter(|&&r| self.y[r]).count();
        let leaf = TreeNode::Leaf {
            prediction: majority(pos, n),
            samples: n,
            positives: pos,
        };
        if depth >= self.max_depth || pos == 0 || pos == n || n < 2 {
            return leaf;
        }
        let parent = entropy(pos, n);
        let mut best: Option<(f64, usize, i64)> = None;
        for &f in &self.order {
            let mut vals: Vec<(i64, bool)> = rows.iter().map(|&r| (self.x[r][f], self.y[r])).collect();
            vals.sort_unstable();
            let (mut left_n, mut left_pos) = (0, 0);
            for i in 0..n - 1 {
                left_n += 1;
                left_pos += usize::from(vals[i].1);
                if vals[i].0 == vals[i + 1].0 {
                    continue;
                }
                let right_n = n - left_n;
                let right_pos = pos - left_pos;
                let child = (left_n as f64 * entropy(left_pos, left_n)
                    + right_n as f64 * entropy(right_pos, right_n))
                    / n as f64;
                let gain = parent - child;
                // Strictly better only: earlier features (by name) and
                // smaller thresholds win ties.
                if gain > 1e-12 && best.is_none_or(|(g, _, _)| gain > g + 1e-12) {
                    best = Some((gain, f, vals[i].0));
                }
            }
        }
        let Some((_, feature, threshold)) = best else {
            return leaf;
        };
        let (l, r): (Vec<usize>, Vec<usize>) =
            rows.iter().partition(|&&row| self.x[row][feature] <= threshold);
        TreeNode::Split {
            feature,
            threshold,
            left: Box::new(self.grow(&l, depth + 1)),
            right: Box::new(self.grow(&r, depth + 1)),
        }
    }
}

fn agreement(root: &TreeNode, x: &[Vec<i64>], y: &[bool], rows: &[usize]) -> f64 {
    if rows.is_empty() {
        return 1.0;
    }
    let hits = rows.iter().filter(|&&r| root.predict(&x[r]) == y[r]).count();
    hits as f64 / rows.len() as f64
}

/// Fit a surrogate on the predictor's decisions.
///
/// A seeded 20% of the rows is held out to measure fidelity; with fewer than
/// five rows fidelity is measured on the training rows.
pub fn fit_surrogate(
    schema: &FeatureSchema,
    x: &[Vec<i64>],
    labels: &[bool],
    max_depth: usize,
    seed: u64,
) -> Result<Surrogate, AnchorsError> {
    if x.len() != labels.len() {
        return Err(AnchorsError::LengthMismatch {
            instances: x.len(),
            labels: labels.len(),
        });
    }
    if x.is_empty() {
        return Err(AnchorsError::NoInstances);
    }
    if let Some(bad) = x.iter().find(|row| row.len() != schema.len()) {
        return Err(AnchorsError::SchemaMismatch {
            expected: schema.len(),
            got: bad.len(),
        });
    }
    let mut rows: Vec<usize> = (0..x.len()).collect();
    rows.shuffle(&mut stage_rng(seed, "surrogate-holdout"));
    let holdout_size = x.len() / 5;
    let (held, train) = rows.split_at(holdout_size);
    let mut train = train.to_vec();
    train.sort_unstable();

    let mut order: Vec<usize> = (0..schema.len()).collect();
    order.sort_by(|&a, &b| schema.name(a).cmp(schema.name(b)).then(a.cmp(&b)));
    let grower = Grower {
        x,
        y: labels,
        order,
        max_depth,
    };
    let root = grower.grow(&train, 0);
    let train_fidelity = agreement(&root, x, labels, &train);
    let fidelity = if held.is_empty() {
        train_fidelity
    } else {
        agreement(&root, x, labels, held)
    };
    let single_class = labels.iter().all(|&l| l == labels[0]);
    Ok(Surrogate {
        schema: schema.clone(),
        root,
        max_depth,
        fidelity,
        train_fidelity,
        holdout_size,
        single_class,
    })
}

impl Surrogate {
    pub fn depth(&self) -> usize {
        self.root.depth()
    }

    /// Fraction of rows where the surrogate matches `labels`.
    pub fn agreement(&self, x: &[Vec<i64>], labels: &[bool]) -> f64 {
        let rows: Vec<usize> = (0..x.len()).collect();
        agreement(&self.root, x, labels, &rows)
    }
}

/// Majority-class rate of a label list, used as a fidelity floor.
pub fn majority_rate(labels: &[bool]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let pos = labels.iter().filter(|&&l| l).count();
    pos.max(labels.len() - pos) as f64 / labels.len() as f64
}
