//! Multiclass gradient-boosted regression trees with softmax coupling.
//!
//! Each round fits one tree per class to the Newton targets of the softmax
//! log-loss. A node splits on the column and threshold with the largest
//! gain
//!
//! `0.5 * (G_L^2 / (H_L + l) + G_R^2 / (H_R + l) - G^2 / (H + l))`
//!
//! and only when that gain reaches `min_split_loss`. Leaves carry
//! `-learning_rate * G / (H + l)`. Scores start from the log class prior.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::encode::EncodedTable;
use crate::error::{Error, Result};
use crate::seed::derive_seed;
use crate::training::{MeanMetrics, Metrics};

/// Floor for the per-row hessian so near-certain rows cannot blow up a leaf.
const MIN_HESSIAN: f64 = 1e-16;
/// Floor for empirical class priors before taking logs.
const MIN_PRIOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbdtConfig {
    pub learning_rate: f64,
    pub min_split_loss: f64,
    pub max_depth: usize,
    pub subsample: f64,
    pub rounds: usize,
    /// L2 penalty on leaf values.
    pub lambda: f64,
    pub seed: u64,
    pub folds: usize,
}

impl Default for GbdtConfig {
    fn default() -> Self {
        GbdtConfig {
            learning_rate: 0.05,
            min_split_loss: 0.01,
            max_depth: 5,
            subsample: 0.5,
            rounds: 100,
            lambda: 1.0,
            seed: crate::training::DEFAULT_MASTER_SEED,
            folds: 5,
        }
    }
}

impl GbdtConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return bad("learning rate must be positive");
        }
        if self.max_depth == 0 {
            return bad("max depth must be at least 1");
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return bad("subsample must lie in (0, 1]");
        }
        if self.folds < 2 {
            return bad("cross-validation needs at least 2 folds");
        }
        if !(self.min_split_loss >= 0.0) || !(self.lambda >= 0.0) {
            return bad("min split loss and lambda must be non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf {
        value: f64,
    },
    /// Rows with `x[column] < threshold` go left.
    Split {
        column: usize,
        threshold: f64,
        gain: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    /// Root at index 0.
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    column,
                    threshold,
                    left,
                    right,
                    ..
                } => i = if x[*column] < *threshold { *left } else { *right },
            }
        }
    }

    /// Number of split levels on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        fn go(t: &Tree, i: usize) -> usize {
            match &t.nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(t, *left).max(go(t, *right)),
            }
        }
        go(self, 0)
    }

    pub fn splits(&self) -> impl Iterator<Item = (usize, f64, f64)> + '_ {
        self.nodes.iter().filter_map(|n| match n {
            Node::Split {
                column,
                threshold,
                gain,
                ..
            } => Some((*column, *threshold, *gain)),
            Node::Leaf { .. } => None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtModel {
    pub classes: usize,
    pub width: usize,
    pub column_names: Vec<String>,
    pub base_score: Vec<f64>,
    /// `rounds[r][k]` is class `k`'s tree in round `r`.
    pub rounds: Vec<Vec<Tree>>,
    /// Mean training log-loss before any round, then after each round.
    pub train_loss: Vec<f64>,
}

impl GbdtModel {
    pub fn scores(&self, x: &[f64]) -> Vec<f64> {
        let mut s = self.base_score.clone();
        for round in &self.rounds {
            for (k, t) in round.iter().enumerate() {
                s[k] += t.predict(x);
            }
        }
        s
    }

    pub fn predict_proba(&self, x: &[f64]) -> Vec<f64> {
        softmax(&self.scores(x))
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        argmax(&self.scores(x))
    }

    pub fn predict_all(&self, rows: &[Vec<f64>]) -> Vec<usize> {
        rows.iter().map(|r| self.predict(r)).collect()
    }

    /// Columns referenced by at least one split.
    pub fn used_columns(&self) -> Vec<usize> {
        let mut used: Vec<usize> = self
            .rounds
            .iter()
            .flatten()
            .flat_map(|t| t.splits().map(|(c, _, _)| c))
            .collect();
        used.sort_unstable();
        used.dedup();
        used
    }

    pub fn trees(&self) -> impl Iterator<Item = &Tree> {
        self.rounds.iter().flatten()
    }
}

fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = e.iter().sum();
    e.into_iter().map(|v| v / sum).collect()
}

fn argmax(z: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in z.iter().enumerate() {
        if v > z[best] {
            best = k;
        }
    }
    best
}

/// Mean multiclass cross-entropy of `model` on `rows`.
pub fn log_loss(model: &GbdtModel, rows: &[Vec<f64>], labels: &[usize]) -> f64 {
    let total: f64 = rows
        .iter()
        .zip(labels)
        .map(|(x, &y)| {
            let s = model.scores(x);
            let max = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + s.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            lse - s[y]
        })
        .sum();
    total / rows.len() as f64
}

/// Per-column sorted distinct values and each row's bin among them.
struct Bins {
    thresholds: Vec<Vec<f64>>,
    index: Vec<Vec<u32>>,
}

impl Bins {
    fn new(rows: &[Vec<f64>], width: usize) -> Self {
        let mut thresholds = Vec::with_capacity(width);
        let mut index = vec![vec![0u32; width]; rows.len()];
        for j in 0..width {
            let mut values: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            values.sort_by(f64::total_cmp);
            values.dedup();
            for (i, r) in rows.iter().enumerate() {
                index[i][j] = values.partition_point(|&v| v < r[j]) as u32;
            }
            thresholds.push(values);
        }
        Bins { thresholds, index }
    }
}

struct Grower<'a> {
    bins: &'a Bins,
    grad: &'a [f64],
    hess: &'a [f64],
    config: &'a GbdtConfig,
}

impl Grower<'_> {
    fn leaf(&self, g: f64, h: f64) -> Node {
        Node::Leaf {
            value: -self.config.learning_rate * g / (h + self.config.lambda),
        }
    }

    fn grow(&self, rows: &[usize], depth: usize, nodes: &mut Vec<Node>) -> usize {
        let id = nodes.len();
        let g: f64 = rows.iter().map(|&i| self.grad[i]).sum();
        let h: f64 = rows.iter().map(|&i| self.hess[i]).sum();
        nodes.push(self.leaf(g, h));
        if depth >= self.config.max_depth || rows.len() < 2 {
            return id;
        }
        let lambda = self.config.lambda;
        let parent = g * g / (h + lambda);
        let mut best: Option<(f64, usize, usize)> = None;
        for (j, values) in self.bins.thresholds.iter().enumerate() {
            if values.len() < 2 {
                continue;
            }
            let mut gs = vec![0.0; values.len()];
            let mut hs = vec![0.0; values.len()];
            for &i in rows {
                let b = self.bins.index[i][j] as usize;
                gs[b] += self.grad[i];
                hs[b] += self.hess[i];
            }
            let (mut gl, mut hl) = (0.0, 0.0);
            for b in 0..values.len() - 1 {
                gl += gs[b];
                hl += hs[b];
                let (gr, hr) = (g - gl, h - hl);
                if hl <= 0.0 || hr <= 0.0 {
                    continue;
                }
                let gain = 0.5 * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - parent);
                if best.is_none_or(|(bg, _, _)| gain > bg) {
                    best = Some((gain, j, b));
                }
            }
        }
        let Some((gain, column, b)) = best else {
            return id;
        };
        if !(gain >= self.config.min_split_loss) {
            return id;
        }
        let values = &self.bins.thresholds[column];
        let threshold = 0.5 * (values[b] + values[b + 1]);
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
            rows.iter().partition(|&&i| (self.bins.index[i][column] as usize) <= b);
        if left_rows.is_empty() || right_rows.is_empty() {
            return id;
        }
        let left = self.grow(&left_rows, depth + 1, nodes);
        let right = self.grow(&right_rows, depth + 1, nodes);
        nodes[id] = Node::Split {
            column,
            threshold,
            gain,
            left,
            right,
        };
        id
    }
}

fn check_inputs(table: &EncodedTable, labels: &[usize], classes: usize) -> Result<()> {
    if table.is_empty() {
        return Err(Error::EmptySplit);
    }
    if table.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} rows for {} labels",
            table.len(),
            labels.len()
        )));
    }
    if classes == 0 {
        return Err(Error::Config("at least one class is required".into()));
    }
    if let Some(&y) = labels.iter().find(|&&y| y >= classes) {
        return Err(Error::IndexOutOfRange { index: y, len: classes });
    }
    Ok(())
}

/// Boosts `config.rounds` rounds on the whole table (no cross-validation).
pub fn fit_gbdt(table: &EncodedTable, labels: &[usize], classes: usize, config: &GbdtConfig) -> Result<GbdtModel> {
    config.validate()?;
    check_inputs(table, labels, classes)?;
    let n = table.len();
    let rows = &table.rows;
    let width = table.width();
    let bins = Bins::new(rows, width);

    let mut counts = vec![0usize; classes];
    for &y in labels {
        counts[y] += 1;
    }
    let base_score: Vec<f64> = counts
        .iter()
        .map(|&c| (c as f64 / n as f64).max(MIN_PRIOR).ln())
        .collect();
    let mut model = GbdtModel {
        classes,
        width,
        column_names: table.column_names.clone(),
        base_score: base_score.clone(),
        rounds: Vec::with_capacity(config.rounds),
        train_loss: Vec::with_capacity(config.rounds + 1),
    };
    let mut scores: Vec<Vec<f64>> = vec![base_score; n];
    let loss_of = |scores: &[Vec<f64>]| -> f64 {
        scores
            .iter()
            .zip(labels)
            .map(|(s, &y)| {
                let max = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                max + s.iter().map(|v| (v - max).exp()).sum::<f64>().ln() - s[y]
            })
            .sum::<f64>()
            / n as f64
    };
    model.train_loss.push(loss_of(&scores));

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, "gbdt/subsample"));
    let take = ((n as f64 * config.subsample).round() as usize).clamp(1, n);
    let mut order: Vec<usize> = (0..n).collect();
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];
    for _ in 0..config.rounds {
        let sample: Vec<usize> = if take == n {
            (0..n).collect()
        } else {
            order.shuffle(&mut rng);
            let mut s = order[..take].to_vec();
            s.sort_unstable();
            s
        };
        let probs: Vec<Vec<f64>> = scores.iter().map(|s| softmax(s)).collect();
        let mut round = Vec::with_capacity(classes);
        for k in 0..classes {
            for i in 0..n {
                let p = probs[i][k];
                grad[i] = p - if labels[i] == k { 1.0 } else { 0.0 };
                hess[i] = (p * (1.0 - p)).max(MIN_HESSIAN);
            }
            let grower = Grower {
                bins: &bins,
                grad: &grad,
                hess: &hess,
                config,
            };
            let mut nodes = Vec::new();
            grower.grow(&sample, 0, &mut nodes);
            round.push(Tree { nodes });
        }
        for (s, x) in scores.iter_mut().zip(rows) {
            for (k, t) in round.iter().enumerate() {
                s[k] += t.predict(x);
            }
        }
        model.rounds.push(round);
        model.train_loss.push(loss_of(&scores));
    }
    Ok(model)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub folds: Vec<Metrics>,
    pub mean: MeanMetrics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedGbdt {
    /// Fitted on every row.
    pub model: GbdtModel,
    pub cv: CvReport,
}

/// Stratified fold assignment: each class's rows are shuffled and dealt
/// round-robin.
pub fn stratified_folds(labels: &[usize], classes: usize, folds: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "gbdt/folds"));
    let mut fold_of = vec![0; labels.len()];
    let mut next = 0;
    for k in 0..classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == k).collect();
        members.shuffle(&mut rng);
        for i in members {
            fold_of[i] = next % folds;
            next += 1;
        }
    }
    fold_of
}

/// Fits the final model on all rows and reports stratified k-fold metrics.
pub fn train_gbdt(
    table: &EncodedTable,
    labels: &[usize],
    class_names: &[&str],
    config: &GbdtConfig,
) -> Result<TrainedGbdt> {
    config.validate()?;
    let classes = class_names.len();
    check_inputs(table, labels, classes)?;
    let fold_of = stratified_folds(labels, classes, config.folds, config.seed);
    let mut folds = Vec::with_capacity(config.folds);
    for f in 0..config.folds {
        let train: Vec<usize> = (0..labels.len()).filter(|&i| fold_of[i] != f).collect();
        let held: Vec<usize> = (0..labels.len()).filter(|&i| fold_of[i] == f).collect();
        if held.is_empty() {
            return Err(Error::Invalid(format!("fold {f} is empty")));
        }
        let train_y: Vec<usize> = train.iter().map(|&i| labels[i]).collect();
        if train_y.iter().all(|&y| y == train_y[0]) {
            return Err(Error::Invalid(format!("fold {f} trains on a single class")));
        }
        let fold_config = GbdtConfig {
            seed: derive_seed(config.seed, &format!("gbdt/fold{f}")),
            ..config.clone()
        };
        let model = fit_gbdt(&table.select(&train), &train_y, classes, &fold_config)?;
        let held_rows = table.select(&held);
        let gold: Vec<usize> = held.iter().map(|&i| labels[i]).collect();
        folds.push(Metrics::from_predictions(
            class_names,
            &gold,
            &model.predict_all(&held_rows.rows),
        )?);
    }
    let refs: Vec<&Metrics> = folds.iter().collect();
    let mean = MeanMetrics::of(&refs);
    let model = fit_gbdt(table, labels, classes, config)?;
    Ok(TrainedGbdt {
        model,
        cv: CvReport { folds, mean },
    })
}
