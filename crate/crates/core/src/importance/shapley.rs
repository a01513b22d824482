//! Monte-Carlo Shapley attribution over column groups.
//!
//! For each sampled ordering the groups are switched one at a time from
//! background values to the instance's values, and each group is credited
//! with the change in the model output. With the full background every
//! ordering's credits sum to `f(instance) - mean f(background)` up to rounding;
//! with one sampled background row per ordering the sum holds in
//! expectation.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::encode::EncodedTable;
use super::gbdt::GbdtModel;
use super::permutation::mean_std;
use crate::error::{Error, Result};
use crate::seed::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BackgroundMode {
    /// Average over every background row at each step.
    #[default]
    Full,
    /// One uniformly drawn background row per ordering.
    SampledRow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ShapleyConfig {
    pub orderings: usize,
    /// Class whose probability is explained; the instance's predicted class
    /// when absent.
    pub class: Option<usize>,
    pub background: BackgroundMode,
}

impl Default for ShapleyConfig {
    fn default() -> Self {
        ShapleyConfig {
            orderings: 100,
            class: None,
            background: BackgroundMode::Full,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapleyEntry {
    pub feature: String,
    /// Contribution under each ordering.
    pub samples: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapleyReport {
    pub class: usize,
    pub orderings: usize,
    pub background: BackgroundMode,
    pub instance_output: f64,
    pub background_mean_output: f64,
    pub features: Vec<ShapleyEntry>,
    /// Sum of contributions under each ordering.
    pub ordering_totals: Vec<f64>,
}

impl ShapleyReport {
    pub fn total(&self) -> f64 {
        self.features.iter().map(|e| e.mean).sum()
    }

    /// Standard error of the mean ordering total.
    pub fn total_standard_error(&self) -> f64 {
        let (_, std) = mean_std(&self.ordering_totals);
        std / (self.ordering_totals.len() as f64).sqrt()
    }
}

/// Mean class probability, accumulated as offsets from the first row so
/// identical outputs average to exactly that value.
fn output(model: &GbdtModel, class: usize, rows: &[Vec<f64>]) -> f64 {
    let first = model.predict_proba(&rows[0])[class];
    let offset: f64 = rows[1..].iter().map(|r| model.predict_proba(r)[class] - first).sum();
    first + offset / rows.len() as f64
}

pub fn shapley_sample(
    model: &GbdtModel,
    instance: &[f64],
    background: &EncodedTable,
    config: &ShapleyConfig,
    seed: u64,
) -> Result<ShapleyReport> {
    if config.orderings == 0 {
        return Err(Error::Config("Shapley sampling needs at least one ordering".into()));
    }
    if background.is_empty() {
        return Err(Error::EmptySplit);
    }
    if instance.len() != model.width || background.width() != model.width {
        return Err(Error::Shape(format!(
            "model expects {} columns, got instance {} and background {}",
            model.width,
            instance.len(),
            background.width()
        )));
    }
    let class = config.class.unwrap_or_else(|| model.predict(instance));
    if class >= model.classes {
        return Err(Error::IndexOutOfRange {
            index: class,
            len: model.classes,
        });
    }
    let groups = &background.groups;
    let instance_output = output(model, class, &[instance.to_vec()]);
    let background_mean_output = output(model, class, &background.rows);

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "shapley"));
    let mut samples = vec![Vec::with_capacity(config.orderings); groups.len()];
    let mut ordering_totals = Vec::with_capacity(config.orderings);
    let mut order: Vec<usize> = (0..groups.len()).collect();
    for _ in 0..config.orderings {
        order.shuffle(&mut rng);
        let mut rows: Vec<Vec<f64>> = match config.background {
            BackgroundMode::Full => background.rows.clone(),
            BackgroundMode::SampledRow => vec![background.rows[rng.random_range(0..background.len())].clone()],
        };
        let mut prev = output(model, class, &rows);
        let mut total = 0.0;
        for (step, &g) in order.iter().enumerate() {
            let now = if step + 1 == order.len() {
                instance_output
            } else {
                let cols = groups[g].columns.clone();
                for r in &mut rows {
                    r[cols.clone()].copy_from_slice(&instance[cols.clone()]);
                }
                output(model, class, &rows)
            };
            samples[g].push(now - prev);
            total += now - prev;
            prev = now;
        }
        ordering_totals.push(total);
    }
    let features = groups
        .iter()
        .zip(samples)
        .map(|(g, s)| {
            let (mean, std) = mean_std(&s);
            ShapleyEntry {
                feature: g.name.clone(),
                samples: s,
                mean,
                std,
            }
        })
        .collect();
    Ok(ShapleyReport {
        class,
        orderings: config.orderings,
        background: config.background,
        instance_output,
        background_mean_output,
        features,
        ordering_totals,
    })
}
