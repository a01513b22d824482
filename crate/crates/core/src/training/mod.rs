//! Mini-batch training with dev-set model selection, evaluation and the
//! multi-seed protocol.

mod metrics;
mod report;

use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, CorpusSplit, LabelScheme};
use crate::error::{Error, Result};
use crate::models::{Architecture, Model, ModelConfig, ModelInput, Vocabulary};
use crate::numkernel::{Optimizer, OptimizerConfig, Tape};
use crate::seed::{derive_seed, run_seeds};

pub use metrics::{accuracy, ClassMetrics, ConfusionMatrix, Metrics};
pub use report::{confusion_svg, confusion_tsv, metrics_text, protocol_text};

pub const DEFAULT_MASTER_SEED: u64 = 20_240_601;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub scheme: LabelScheme,
    pub model: ModelConfig,
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerConfig,
    /// Extra non-improving epochs tolerated before stopping.
    pub patience: usize,
    pub seeds: Vec<u64>,
    /// Pretrained embedding file; random initialization when absent.
    pub embeddings: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            scheme: LabelScheme::FourWay,
            model: ModelConfig::default(),
            epochs: 30,
            batch_size: 32,
            optimizer: OptimizerConfig::default(),
            patience: 5,
            seeds: run_seeds(DEFAULT_MASTER_SEED, 5),
            embeddings: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        if !(self.optimizer.learning_rate > 0.0) {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_macro_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub seed: u64,
    pub epochs: Vec<EpochLog>,
    /// 1-based epoch whose parameters were kept.
    pub best_epoch: usize,
    pub best_dev_macro_f1: f64,
    pub stopped_early: bool,
    /// Set when a non-finite loss ended training; the model is the last good one.
    pub diverged: Option<String>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Model,
    pub log: TrainingLog,
}

/// Gold class ids for every mention of `split`, in mention order.
pub fn gold_labels(split: &CorpusSplit, scheme: LabelScheme) -> Vec<usize> {
    split
        .mention_refs()
        .map(|(d, m)| scheme.class_of(split.documents[d].mentions[m].form))
        .collect()
}

fn padded_length(arch: Architecture, input: &ModelInput) -> usize {
    match arch {
        Architecture::CRnn => input.pre_context.len() + 1 + input.pos_context.len(),
        Architecture::ConAtt => input.pre_context.len().max(input.pos_context.len()),
    }
}

/// Shuffles, then groups mentions of similar length into batches, then
/// shuffles the batch order.
fn make_batches(arch: Architecture, inputs: &[ModelInput], batch_size: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    order.shuffle(rng);
    order.sort_by_key(|&i| padded_length(arch, &inputs[i]));
    let mut batches: Vec<Vec<usize>> = order.chunks(batch_size).map(<[usize]>::to_vec).collect();
    batches.shuffle(rng);
    batches
}

/// Predicted class ids for a split.
pub fn predict(model: &Model, split: &CorpusSplit) -> Result<Vec<usize>> {
    let inputs = model.inputs(split)?;
    Ok(model
        .predict_all(&inputs)?
        .into_iter()
        .map(|(_, p)| p.argmax())
        .collect())
}

pub fn evaluate(model: &Model, split: &CorpusSplit) -> Result<Metrics> {
    if split.mention_count() == 0 {
        return Err(Error::EmptySplit);
    }
    let scheme = model.scheme();
    let gold = gold_labels(split, scheme);
    let predicted = predict(model, split)?;
    Metrics::from_predictions(scheme.class_names(), &gold, &predicted)
}

/// Trains one model from `seed`, keeping the parameters with the best dev
/// macro-F1.
pub fn train(config: &TrainConfig, seed: u64, corpus: &Corpus, vocab: &Vocabulary) -> Result<TrainOutcome> {
    config.validate()?;
    if corpus.train.mention_count() == 0 || corpus.dev.mention_count() == 0 {
        return Err(Error::EmptySplit);
    }
    let mut model = Model::new(
        config.model.clone(),
        config.scheme,
        vocab.clone(),
        derive_seed(seed, "init"),
    )?;
    if let Some(path) = &config.embeddings {
        let report = model.load_embeddings(path)?;
        log::info!(
            "pretrained embeddings cover {}/{} tokens",
            report.covered,
            report.eligible
        );
    }
    let inputs = model.inputs(&corpus.train)?;
    let gold = gold_labels(&corpus.train, config.scheme);
    let mut optimizer = Optimizer::new(config.optimizer, model.store());
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "batches"));

    let mut best = model.store().clone();
    let mut log = TrainingLog {
        seed,
        epochs: Vec::new(),
        best_epoch: 0,
        best_dev_macro_f1: f64::NEG_INFINITY,
        stopped_early: false,
        diverged: None,
    };
    let mut stale = 0;
    'epochs: for epoch in 1..=config.epochs {
        let mut total = 0.0;
        for batch in make_batches(config.model.architecture, &inputs, config.batch_size, &mut rng) {
            let refs: Vec<&ModelInput> = batch.iter().map(|&i| &inputs[i]).collect();
            let labels: Vec<usize> = batch.iter().map(|&i| gold[i]).collect();
            let mut tape = Tape::new();
            let loss = model.loss(&mut tape, &refs, &labels)?;
            let value = tape.value(loss).get(0, 0);
            let step = if value.is_finite() {
                model.store_mut().zero_grads();
                tape.backward(loss, model.store_mut())
                    .and_then(|_| optimizer.step(model.store_mut()))
            } else {
                Err(Error::Numerical(format!("loss {value} in epoch {epoch}")))
            };
            if let Err(e) = step {
                log::warn!("training diverged: {e}");
                log.diverged = Some(e.to_string());
                break 'epochs;
            }
            total += value * batch.len() as f64;
        }
        let dev = evaluate(&model, &corpus.dev)?;
        log.epochs.push(EpochLog {
            epoch,
            train_loss: total / inputs.len() as f64,
            dev_macro_f1: dev.macro_f1,
        });
        log::debug!(
            "seed {seed} epoch {epoch}: loss {:.5} dev macro-F1 {:.4}",
            total / inputs.len() as f64,
            dev.macro_f1
        );
        if dev.macro_f1 > log.best_dev_macro_f1 {
            log.best_dev_macro_f1 = dev.macro_f1;
            log.best_epoch = epoch;
            best = model.store().clone();
            stale = 0;
        } else {
            stale += 1;
            if stale > config.patience {
                log.stopped_early = epoch < config.epochs;
                break;
            }
        }
    }
    if log.best_epoch == 0 {
        return Err(Error::Numerical(
            log.diverged.clone().unwrap_or_else(|| "no epoch completed".into()),
        ));
    }
    *model.store_mut() = best;
    Ok(TrainOutcome { model, log })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanMetrics {
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub accuracy: f64,
}

impl MeanMetrics {
    pub fn of(runs: &[&Metrics]) -> Self {
        let n = runs.len() as f64;
        let mean = |f: fn(&Metrics) -> f64| runs.iter().map(|m| f(m)).sum::<f64>() / n;
        MeanMetrics {
            macro_precision: mean(|m| m.macro_precision),
            macro_recall: mean(|m| m.macro_recall),
            macro_f1: mean(|m| m.macro_f1),
            accuracy: mean(|m| m.accuracy),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRun {
    pub seed: u64,
    pub log: TrainingLog,
    pub dev: Metrics,
    pub test: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolReport {
    pub scheme: LabelScheme,
    pub architecture: Architecture,
    pub runs: Vec<SeedRun>,
    pub mean_dev: MeanMetrics,
    pub mean_test: MeanMetrics,
    /// Index into `runs` of the run with the best dev macro-F1.
    pub best_run: usize,
}

impl ProtocolReport {
    pub fn from_runs(scheme: LabelScheme, architecture: Architecture, runs: Vec<SeedRun>) -> Result<Self> {
        if runs.is_empty() {
            return Err(Error::Config("no runs".into()));
        }
        let dev: Vec<&Metrics> = runs.iter().map(|r| &r.dev).collect();
        let test: Vec<&Metrics> = runs.iter().map(|r| &r.test).collect();
        let mut best_run = 0;
        for (i, r) in runs.iter().enumerate() {
            if r.dev.macro_f1 > runs[best_run].dev.macro_f1 {
                best_run = i;
            }
        }
        Ok(ProtocolReport {
            scheme,
            architecture,
            mean_dev: MeanMetrics::of(&dev),
            mean_test: MeanMetrics::of(&test),
            runs,
            best_run,
        })
    }
}

#[derive(Debug, Clone)]
pub struct ProtocolOutcome {
    pub report: ProtocolReport,
    pub models: Vec<Model>,
}

/// Trains and evaluates one model per configured seed (in parallel) and
/// averages the scalar metrics.
pub fn run_protocol(config: &TrainConfig, corpus: &Corpus, vocab: &Vocabulary) -> Result<ProtocolOutcome> {
    config.validate()?;
    let results: Vec<Result<(SeedRun, Model)>> = config
        .seeds
        .par_iter()
        .map(|&seed| {
            let out = train(config, seed, corpus, vocab)?;
            let dev = evaluate(&out.model, &corpus.dev)?;
            let test = evaluate(&out.model, &corpus.test)?;
            Ok((
                SeedRun {
                    seed,
                    log: out.log,
                    dev,
                    test,
                },
                out.model,
            ))
        })
        .collect();
    let mut runs = Vec::new();
    let mut models = Vec::new();
    for r in results {
        let (run, model) = r?;
        runs.push(run);
        models.push(model);
    }
    let report = ProtocolReport::from_runs(config.scheme, config.model.architecture, runs)?;
    Ok(ProtocolOutcome { report, models })
}

#[cfg(test)]
mod tests;
