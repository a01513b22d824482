use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::training::{ConfusionMatrix, Metrics};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub accuracy: f64,
    pub macro_f1: f64,
}

impl Score {
    pub fn of(classes: usize, gold: &[usize], predicted: &[usize]) -> Result<Self> {
        let cm = ConfusionMatrix::from_predictions(classes, gold, predicted)?;
        let names: Vec<String> = (0..classes).map(|k| k.to_string()).collect();
        let names: Vec<&str> = names.iter().map(String::as_str).collect();
        let m = Metrics::from_confusion(cm, &names)?;
        Ok(Score {
            accuracy: m.accuracy,
            macro_f1: m.macro_f1,
        })
    }

    pub fn mean(scores: &[Score]) -> Score {
        let n = scores.len() as f64;
        Score {
            accuracy: scores.iter().map(|s| s.accuracy).sum::<f64>() / n,
            macro_f1: scores.iter().map(|s| s.macro_f1).sum::<f64>() / n,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Baselines {
    pub random: Score,
    pub majority: Score,
    pub majority_class: usize,
}

/// Most frequent label; ties go to the lowest class id.
pub fn majority_label(labels: &[usize], classes: usize) -> Result<usize> {
    if labels.is_empty() {
        return Err(Error::EmptySplit);
    }
    let mut counts = vec![0usize; classes];
    for &y in labels {
        *counts
            .get_mut(y)
            .ok_or(Error::IndexOutOfRange { index: y, len: classes })? += 1;
    }
    let mut best = 0;
    for (k, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = k;
        }
    }
    Ok(best)
}

/// Uniform random labels and the training-majority constant, both scored
/// on `eval`.
pub fn run_baselines(train: &[usize], eval: &[usize], classes: usize, seed: u64) -> Result<Baselines> {
    if eval.is_empty() {
        return Err(Error::EmptySplit);
    }
    let majority_class = majority_label(train, classes)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let random: Vec<usize> = eval.iter().map(|_| rng.random_range(0..classes)).collect();
    Ok(Baselines {
        random: Score::of(classes, eval, &random)?,
        majority: Score::of(classes, eval, &vec![majority_class; eval.len()])?,
        majority_class,
    })
}
