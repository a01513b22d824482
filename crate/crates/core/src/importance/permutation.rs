use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::encode::EncodedTable;
use super::gbdt::{log_loss, GbdtModel};
use crate::error::{Error, Result};
use crate::seed::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermutationEntry {
    pub feature: String,
    /// Loss increase per repetition.
    pub samples: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermutationReport {
    pub baseline_loss: f64,
    pub repetitions: usize,
    pub features: Vec<PermutationEntry>,
}

impl PermutationReport {
    pub fn get(&self, feature: &str) -> Option<&PermutationEntry> {
        self.features.iter().find(|e| e.feature == feature)
    }

    /// Entries sorted by decreasing mean loss increase.
    pub fn ranked(&self) -> Vec<&PermutationEntry> {
        let mut v: Vec<&PermutationEntry> = self.features.iter().collect();
        v.sort_by(|a, b| b.mean.total_cmp(&a.mean));
        v
    }
}

pub(crate) fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Log-loss increase when one feature's columns are shuffled jointly across
/// rows, for every column group of `table`.
pub fn permutation_importance(
    model: &GbdtModel,
    table: &EncodedTable,
    labels: &[usize],
    repetitions: usize,
    seed: u64,
) -> Result<PermutationReport> {
    if repetitions == 0 {
        return Err(Error::Config(
            "permutation importance needs at least one repetition".into(),
        ));
    }
    if table.is_empty() || table.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} rows for {} labels",
            table.len(),
            labels.len()
        )));
    }
    if table.width() != model.width {
        return Err(Error::Shape(format!(
            "model expects {} columns, table has {}",
            model.width,
            table.width()
        )));
    }
    let baseline_loss = log_loss(model, &table.rows, labels);
    let features = table
        .groups
        .par_iter()
        .map(|group| {
            let samples: Vec<f64> = (0..repetitions)
                .map(|r| {
                    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &format!("permute/{}/{r}", group.name)));
                    let mut order: Vec<usize> = (0..table.len()).collect();
                    order.shuffle(&mut rng);
                    let permuted: Vec<Vec<f64>> = table
                        .rows
                        .iter()
                        .zip(&order)
                        .map(|(row, &src)| {
                            let mut row = row.clone();
                            row[group.columns.clone()].copy_from_slice(&table.rows[src][group.columns.clone()]);
                            row
                        })
                        .collect();
                    log_loss(model, &permuted, labels) - baseline_loss
                })
                .collect();
            let (mean, std) = mean_std(&samples);
            PermutationEntry {
                feature: group.name.clone(),
                samples,
                mean,
                std,
            }
        })
        .collect();
    Ok(PermutationReport {
        baseline_loss,
        repetitions,
        features,
    })
}
