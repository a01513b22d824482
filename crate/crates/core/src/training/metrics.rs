use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `counts[gold][predicted]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(k: usize) -> Self {
        ConfusionMatrix {
            counts: vec![vec![0; k]; k],
        }
    }

    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self> {
        let k = counts.len();
        if k < 2 || counts.iter().any(|r| r.len() != k) {
            return Err(Error::Shape("confusion matrix must be K x K with K >= 2".into()));
        }
        Ok(ConfusionMatrix { counts })
    }

    pub fn from_predictions(k: usize, gold: &[usize], predicted: &[usize]) -> Result<Self> {
        if gold.len() != predicted.len() {
            return Err(Error::Shape("gold and predicted lengths differ".into()));
        }
        let mut m = ConfusionMatrix::new(k);
        for (&g, &p) in gold.iter().zip(predicted) {
            if g >= k || p >= k {
                return Err(Error::IndexOutOfRange {
                    index: g.max(p),
                    len: k,
                });
            }
            m.counts[g][p] += 1;
        }
        Ok(m)
    }

    pub fn k(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.k()).map(|i| self.counts[i][i]).sum()
    }

    pub fn support(&self, class: usize) -> u64 {
        self.counts[class].iter().sum()
    }

    pub fn predicted(&self, class: usize) -> u64 {
        self.counts.iter().map(|r| r[class]).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub name: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

/// Precision, recall and F1 per class plus their unweighted means. A ratio
/// with a zero denominator counts as 0, so every class of the scheme enters
/// the macro average.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub per_class: Vec<ClassMetrics>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub accuracy: f64,
    pub confusion: ConfusionMatrix,
}

fn ratio(a: u64, b: u64) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

impl Metrics {
    pub fn from_confusion(confusion: ConfusionMatrix, names: &[&str]) -> Result<Self> {
        let k = confusion.k();
        if names.len() != k {
            return Err(Error::Shape(format!("{} class names for K = {k}", names.len())));
        }
        if confusion.total() == 0 {
            return Err(Error::EmptySplit);
        }
        let per_class: Vec<ClassMetrics> = (0..k)
            .map(|c| {
                let tp = confusion.counts[c][c];
                let precision = ratio(tp, confusion.predicted(c));
                let recall = ratio(tp, confusion.support(c));
                let f1 = if precision + recall == 0.0 {
                    0.0
                } else {
                    2.0 * precision * recall / (precision + recall)
                };
                ClassMetrics {
                    name: names[c].to_string(),
                    precision,
                    recall,
                    f1,
                    support: confusion.support(c),
                }
            })
            .collect();
        let mean = |f: fn(&ClassMetrics) -> f64| per_class.iter().map(f).sum::<f64>() / k as f64;
        Ok(Metrics {
            macro_precision: mean(|c| c.precision),
            macro_recall: mean(|c| c.recall),
            macro_f1: mean(|c| c.f1),
            accuracy: ratio(confusion.trace(), confusion.total()),
            per_class,
            confusion,
        })
    }

    pub fn from_predictions(names: &[&str], gold: &[usize], predicted: &[usize]) -> Result<Self> {
        Self::from_confusion(ConfusionMatrix::from_predictions(names.len(), gold, predicted)?, names)
    }
}

pub fn accuracy(gold: &[usize], predicted: &[usize]) -> f64 {
    if gold.is_empty() {
        return 0.0;
    }
    gold.iter().zip(predicted).filter(|(g, p)| g == p).count() as f64 / gold.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn binary_fixture() {
        let cm = ConfusionMatrix::from_counts(vec![vec![2, 0], vec![1, 1]]).unwrap();
        let m = Metrics::from_confusion(cm, &["a", "b"]).unwrap();
        assert!((m.per_class[0].f1 - 0.8).abs() < 1e-12);
        assert!((m.per_class[1].f1 - 2.0 / 3.0).abs() < 1e-12);
        assert!((m.macro_f1 - 0.733_333_333_333).abs() < 1e-9);
        assert_eq!(m.accuracy, 0.75);
    }

    #[test]
    fn perfect_and_absent_predictions() {
        let m = Metrics::from_predictions(&["a", "b", "c"], &[0, 1, 2, 2], &[0, 1, 2, 2]).unwrap();
        assert_eq!(
            (m.macro_precision, m.macro_recall, m.macro_f1, m.accuracy),
            (1.0, 1.0, 1.0, 1.0)
        );
        let m = Metrics::from_predictions(&["a", "b"], &[0, 0, 1], &[0, 0, 0]).unwrap();
        assert_eq!(m.per_class[1].precision, 0.0);
        assert!((m.macro_f1 - 0.4).abs() < 1e-12);
        assert!(Metrics::from_predictions(&["a", "b"], &[], &[]).is_err());
    }

    fn binary_prf(gold: &[usize], pred: &[usize], positive: usize) -> (f64, f64, f64) {
        let tp = gold
            .iter()
            .zip(pred)
            .filter(|(g, p)| **g == positive && **p == positive)
            .count() as f64;
        let pp = pred.iter().filter(|p| **p == positive).count() as f64;
        let ap = gold.iter().filter(|g| **g == positive).count() as f64;
        let p = if pp > 0.0 { tp / pp } else { 0.0 };
        let r = if ap > 0.0 { tp / ap } else { 0.0 };
        let f = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
        (p, r, f)
    }

    proptest! {
        #[test]
        fn invariants(pairs in prop::collection::vec((0usize..3, 0usize..3), 1..60), perm_seed in 0usize..6) {
            let gold: Vec<usize> = pairs.iter().map(|p| p.0).collect();
            let pred: Vec<usize> = pairs.iter().map(|p| p.1).collect();
            let m = Metrics::from_predictions(&["x", "y", "z"], &gold, &pred).unwrap();
            prop_assert_eq!(m.accuracy, m.confusion.trace() as f64 / m.confusion.total() as f64);
            prop_assert_eq!(m.accuracy, accuracy(&gold, &pred));
            for c in 0..3 {
                prop_assert_eq!(m.confusion.support(c), gold.iter().filter(|&&g| g == c).count() as u64);
            }
            let mean = m.per_class.iter().map(|c| c.f1).sum::<f64>() / 3.0;
            prop_assert!((m.macro_f1 - mean).abs() < 1e-15);

            let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
            let p = perms[perm_seed];
            let g2: Vec<usize> = gold.iter().map(|&g| p[g]).collect();
            let p2: Vec<usize> = pred.iter().map(|&x| p[x]).collect();
            let m2 = Metrics::from_predictions(&["x", "y", "z"], &g2, &p2).unwrap();
            prop_assert!((m.macro_f1 - m2.macro_f1).abs() < 1e-12);
        }

        #[test]
        fn two_way_matches_binary_prf(pairs in prop::collection::vec((0usize..2, 0usize..2), 1..60)) {
            let gold: Vec<usize> = pairs.iter().map(|p| p.0).collect();
            let pred: Vec<usize> = pairs.iter().map(|p| p.1).collect();
            let m = Metrics::from_predictions(&["non-pronominal", "pronominal"], &gold, &pred).unwrap();
            let a = binary_prf(&gold, &pred, 0);
            let b = binary_prf(&gold, &pred, 1);
            prop_assert!((m.macro_precision - (a.0 + b.0) / 2.0).abs() < 1e-12);
            prop_assert!((m.macro_recall - (a.1 + b.1) / 2.0).abs() < 1e-12);
            prop_assert!((m.macro_f1 - (a.2 + b.2) / 2.0).abs() < 1e-12);
        }
    }
}
