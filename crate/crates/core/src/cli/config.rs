//! Flat `key = value` run configuration.
//!
//! Precedence, lowest first: built-in defaults, the `--config` file, the
//! `REFSEL_SEED` environment variable, `--key value` flags.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::corpus::{LabelScheme, SplitName, SynthConfig};
use crate::error::{Error, Result};
use crate::features::CountScope;
use crate::importance::{BackgroundMode, GbdtConfig, ShapleyConfig};
use crate::models::Architecture;
use crate::numkernel::{OptimizerKind, DEFAULT_TOLERANCE};
use crate::probing::{ProbeConfig, ProbeInit, ProbeSplit};
use crate::seed::{derive_seed, run_seeds};
use crate::training::{TrainConfig, DEFAULT_MASTER_SEED};

pub const SEED_ENV: &str = "REFSEL_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureChoice {
    /// The feature-based classifier's inputs for the label scheme.
    Scheme,
    /// The eight probing-task features.
    Probing,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub file: Option<PathBuf>,
    pub train: Option<PathBuf>,
    pub dev: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub meta: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub split: SplitName,
    pub scheme: LabelScheme,
    pub runs: usize,
    pub training: TrainConfig,
    pub synth: SynthConfig,
    pub count_scope: CountScope,
    pub probe: ProbeConfig,
    pub probe_runs: usize,
    pub probe_split: ProbeSplit,
    pub probe_shuffled: bool,
    pub probe_untrained: bool,
    pub gbdt: GbdtConfig,
    pub features: FeatureChoice,
    pub repetitions: usize,
    pub shapley: ShapleyConfig,
    pub shapley_instance: usize,
    pub background_rows: usize,
    pub gradcheck_tolerance: f64,
    /// Keys given explicitly by file, environment or flag.
    explicit: BTreeSet<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: DEFAULT_MASTER_SEED,
            out: None,
            jobs: None,
            file: None,
            train: None,
            dev: None,
            test: None,
            meta: None,
            model: None,
            split: SplitName::Test,
            scheme: LabelScheme::FourWay,
            runs: 5,
            training: TrainConfig::default(),
            synth: SynthConfig::default(),
            count_scope: CountScope::Full,
            probe: ProbeConfig::default(),
            probe_runs: 5,
            probe_split: ProbeSplit::TrainTest,
            probe_shuffled: true,
            probe_untrained: false,
            gbdt: GbdtConfig::default(),
            features: FeatureChoice::Scheme,
            repetitions: 10,
            shapley: ShapleyConfig::default(),
            shapley_instance: 0,
            background_rows: 200,
            gradcheck_tolerance: DEFAULT_TOLERANCE,
            explicit: BTreeSet::new(),
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected true or false, got {value:?}"))),
    }
}

fn opt_path(value: &str) -> Option<PathBuf> {
    (!value.is_empty()).then(|| PathBuf::from(value))
}

fn show_path(p: &Option<PathBuf>) -> String {
    p.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
}

/// Keys that never change results; they are left out of run records.
const UNRECORDED: &[&str] = &["out", "jobs"];

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        let t = &mut self.training;
        match key {
            "seed" => self.seed = parse(key, v)?,
            "out" => self.out = opt_path(v),
            "jobs" => self.jobs = if v.is_empty() { None } else { Some(parse(key, v)?) },
            "file" => self.file = opt_path(v),
            "train" => self.train = opt_path(v),
            "dev" => self.dev = opt_path(v),
            "test" => self.test = opt_path(v),
            "meta" => self.meta = opt_path(v),
            "model" => self.model = opt_path(v),
            "split" => {
                self.split = match v {
                    "train" => SplitName::Train,
                    "dev" => SplitName::Dev,
                    "test" => SplitName::Test,
                    _ => return Err(Error::Config(format!("split: unknown split {v:?}"))),
                }
            }
            "scheme" => self.scheme = v.parse()?,
            "runs" => self.runs = parse(key, v)?,
            "arch" => t.model.architecture = v.parse::<Architecture>()?,
            "embed_dim" => t.model.embed_dim = parse(key, v)?,
            "hidden" => t.model.hidden = parse(key, v)?,
            "attn_dim" => t.model.attn_dim = parse(key, v)?,
            "repr_dim" => t.model.repr_dim = parse(key, v)?,
            "max_context" => t.model.max_context = parse(key, v)?,
            "dense_bias" => t.model.dense_bias = parse_bool(key, v)?,
            "unk_fallback" => t.model.unk_fallback = parse_bool(key, v)?,
            "epochs" => t.epochs = parse(key, v)?,
            "batch_size" => t.batch_size = parse(key, v)?,
            "patience" => t.patience = parse(key, v)?,
            "embeddings" => t.embeddings = opt_path(v),
            "optimizer" => {
                t.optimizer.kind = match v {
                    "adam" => OptimizerKind::Adam,
                    "sgd" => OptimizerKind::Sgd,
                    _ => return Err(Error::Config(format!("optimizer: unknown optimizer {v:?}"))),
                }
            }
            "lr" => t.optimizer.learning_rate = parse(key, v)?,
            "beta1" => t.optimizer.beta1 = parse(key, v)?,
            "beta2" => t.optimizer.beta2 = parse(key, v)?,
            "epsilon" => t.optimizer.epsilon = parse(key, v)?,
            "clip_norm" => {
                t.optimizer.clip_norm = if v.is_empty() || v == "none" {
                    None
                } else {
                    Some(parse(key, v)?)
                }
            }
            "synth.documents" => self.synth.documents = parse(key, v)?,
            "synth.min_sentences" => self.synth.min_sentences = parse(key, v)?,
            "synth.max_sentences" => self.synth.max_sentences = parse(key, v)?,
            "synth.min_objects" => self.synth.min_objects = parse(key, v)?,
            "synth.max_objects" => self.synth.max_objects = parse(key, v)?,
            "synth.min_filler" => self.synth.min_filler = parse(key, v)?,
            "synth.max_filler" => self.synth.max_filler = parse(key, v)?,
            "synth.entities" => self.synth.entities = parse(key, v)?,
            "synth.entities_per_doc" => self.synth.entities_per_doc = parse(key, v)?,
            "synth.zipf_exponent" => self.synth.zipf_exponent = parse(key, v)?,
            "synth.reuse_prob" => self.synth.reuse_prob = parse(key, v)?,
            "synth.noise" => self.synth.noise = parse(key, v)?,
            "synth.train_fraction" => self.synth.train_fraction = parse(key, v)?,
            "synth.dev_fraction" => self.synth.dev_fraction = parse(key, v)?,
            "meta_pro.scope" => {
                self.count_scope = match v {
                    "full" => CountScope::Full,
                    "train" => CountScope::Train,
                    _ => return Err(Error::Config(format!("meta_pro.scope: unknown scope {v:?}"))),
                }
            }
            "probe.l2" => self.probe.l2 = parse(key, v)?,
            "probe.max_iterations" => self.probe.max_iterations = parse(key, v)?,
            "probe.tolerance" => self.probe.gradient_tolerance = parse(key, v)?,
            "probe.init" => {
                self.probe.init = match v {
                    "zero" => ProbeInit::Zero,
                    "small" => ProbeInit::Small {
                        scale: match self.probe.init {
                            ProbeInit::Small { scale } => scale,
                            ProbeInit::Zero => 0.01,
                        },
                    },
                    _ => return Err(Error::Config(format!("probe.init: expected zero or small, got {v:?}"))),
                }
            }
            "probe.init_scale" => {
                let scale = parse(key, v)?;
                if let ProbeInit::Small { scale: s } = &mut self.probe.init {
                    *s = scale;
                }
            }
            "probe.standardize" => self.probe.standardize = parse_bool(key, v)?,
            "probe.runs" => self.probe_runs = parse(key, v)?,
            "probe.split" => self.probe_split = v.parse()?,
            "probe.shuffled_control" => self.probe_shuffled = parse_bool(key, v)?,
            "probe.untrained_control" => self.probe_untrained = parse_bool(key, v)?,
            "gbdt.learning_rate" => self.gbdt.learning_rate = parse(key, v)?,
            "gbdt.min_split_loss" => self.gbdt.min_split_loss = parse(key, v)?,
            "gbdt.max_depth" => self.gbdt.max_depth = parse(key, v)?,
            "gbdt.subsample" => self.gbdt.subsample = parse(key, v)?,
            "gbdt.rounds" => self.gbdt.rounds = parse(key, v)?,
            "gbdt.lambda" => self.gbdt.lambda = parse(key, v)?,
            "gbdt.folds" => self.gbdt.folds = parse(key, v)?,
            "importance.features" => {
                self.features = match v {
                    "scheme" => FeatureChoice::Scheme,
                    "probing" => FeatureChoice::Probing,
                    _ => {
                        return Err(Error::Config(format!(
                            "importance.features: expected scheme or probing, got {v:?}"
                        )))
                    }
                }
            }
            "importance.repetitions" => self.repetitions = parse(key, v)?,
            "shapley.orderings" => self.shapley.orderings = parse(key, v)?,
            "shapley.class" => self.shapley.class = if v.is_empty() { None } else { Some(parse(key, v)?) },
            "shapley.background" => {
                self.shapley.background = match v {
                    "full" => BackgroundMode::Full,
                    "sampled_row" => BackgroundMode::SampledRow,
                    _ => return Err(Error::Config(format!("shapley.background: unknown mode {v:?}"))),
                }
            }
            "shapley.instance" => self.shapley_instance = parse(key, v)?,
            "shapley.background_rows" => self.background_rows = parse(key, v)?,
            "gradcheck.tolerance" => self.gradcheck_tolerance = parse(key, v)?,
            _ => return Err(Error::Config(format!("unknown configuration key {key:?}"))),
        }
        self.explicit.insert(key.to_string());
        Ok(())
    }

    pub fn is_explicit(&self, key: &str) -> bool {
        self.explicit.contains(key)
    }

    /// Every key with its current value, in a fixed order.
    pub fn pairs(&self) -> Vec<(&'static str, String)> {
        let t = &self.training;
        let m = &t.model;
        let o = &t.optimizer;
        let s = &self.synth;
        let (init, scale) = match self.probe.init {
            ProbeInit::Zero => ("zero", 0.01),
            ProbeInit::Small { scale } => ("small", scale),
        };
        vec![
            ("seed", self.seed.to_string()),
            ("out", show_path(&self.out)),
            ("jobs", self.jobs.map(|j| j.to_string()).unwrap_or_default()),
            ("file", show_path(&self.file)),
            ("train", show_path(&self.train)),
            ("dev", show_path(&self.dev)),
            ("test", show_path(&self.test)),
            ("meta", show_path(&self.meta)),
            ("model", show_path(&self.model)),
            ("split", self.split.name().to_string()),
            ("scheme", self.scheme.name().to_string()),
            ("runs", self.runs.to_string()),
            ("arch", m.architecture.name().to_string()),
            ("embed_dim", m.embed_dim.to_string()),
            ("hidden", m.hidden.to_string()),
            ("attn_dim", m.attn_dim.to_string()),
            ("repr_dim", m.repr_dim.to_string()),
            ("max_context", m.max_context.to_string()),
            ("dense_bias", m.dense_bias.to_string()),
            ("unk_fallback", m.unk_fallback.to_string()),
            ("epochs", t.epochs.to_string()),
            ("batch_size", t.batch_size.to_string()),
            ("patience", t.patience.to_string()),
            ("embeddings", show_path(&t.embeddings)),
            (
                "optimizer",
                match o.kind {
                    OptimizerKind::Adam => "adam",
                    OptimizerKind::Sgd => "sgd",
                }
                .to_string(),
            ),
            ("lr", o.learning_rate.to_string()),
            ("beta1", o.beta1.to_string()),
            ("beta2", o.beta2.to_string()),
            ("epsilon", o.epsilon.to_string()),
            (
                "clip_norm",
                o.clip_norm.map(|c| c.to_string()).unwrap_or_else(|| "none".into()),
            ),
            ("synth.documents", s.documents.to_string()),
            ("synth.min_sentences", s.min_sentences.to_string()),
            ("synth.max_sentences", s.max_sentences.to_string()),
            ("synth.min_objects", s.min_objects.to_string()),
            ("synth.max_objects", s.max_objects.to_string()),
            ("synth.min_filler", s.min_filler.to_string()),
            ("synth.max_filler", s.max_filler.to_string()),
            ("synth.entities", s.entities.to_string()),
            ("synth.entities_per_doc", s.entities_per_doc.to_string()),
            ("synth.zipf_exponent", s.zipf_exponent.to_string()),
            ("synth.reuse_prob", s.reuse_prob.to_string()),
            ("synth.noise", s.noise.to_string()),
            ("synth.train_fraction", s.train_fraction.to_string()),
            ("synth.dev_fraction", s.dev_fraction.to_string()),
            (
                "meta_pro.scope",
                match self.count_scope {
                    CountScope::Full => "full",
                    CountScope::Train => "train",
                }
                .to_string(),
            ),
            ("probe.l2", self.probe.l2.to_string()),
            ("probe.max_iterations", self.probe.max_iterations.to_string()),
            ("probe.tolerance", self.probe.gradient_tolerance.to_string()),
            ("probe.init", init.to_string()),
            ("probe.init_scale", scale.to_string()),
            ("probe.standardize", self.probe.standardize.to_string()),
            ("probe.runs", self.probe_runs.to_string()),
            ("probe.split", self.probe_split.name().to_string()),
            ("probe.shuffled_control", self.probe_shuffled.to_string()),
            ("probe.untrained_control", self.probe_untrained.to_string()),
            ("gbdt.learning_rate", self.gbdt.learning_rate.to_string()),
            ("gbdt.min_split_loss", self.gbdt.min_split_loss.to_string()),
            ("gbdt.max_depth", self.gbdt.max_depth.to_string()),
            ("gbdt.subsample", self.gbdt.subsample.to_string()),
            ("gbdt.rounds", self.gbdt.rounds.to_string()),
            ("gbdt.lambda", self.gbdt.lambda.to_string()),
            ("gbdt.folds", self.gbdt.folds.to_string()),
            (
                "importance.features",
                match self.features {
                    FeatureChoice::Scheme => "scheme",
                    FeatureChoice::Probing => "probing",
                }
                .to_string(),
            ),
            ("importance.repetitions", self.repetitions.to_string()),
            ("shapley.orderings", self.shapley.orderings.to_string()),
            (
                "shapley.class",
                self.shapley.class.map(|c| c.to_string()).unwrap_or_default(),
            ),
            (
                "shapley.background",
                match self.shapley.background {
                    BackgroundMode::Full => "full",
                    BackgroundMode::SampledRow => "sampled_row",
                }
                .to_string(),
            ),
            ("shapley.instance", self.shapley_instance.to_string()),
            ("shapley.background_rows", self.background_rows.to_string()),
            ("gradcheck.tolerance", self.gradcheck_tolerance.to_string()),
        ]
    }

    /// The result-affecting keys: everything but the output location and
    /// thread count.
    pub fn recorded_pairs(&self) -> Vec<(&'static str, String)> {
        self.pairs()
            .into_iter()
            .filter(|(k, _)| !UNRECORDED.contains(k))
            .collect()
    }

    /// Config file text that reproduces this configuration given an `out`.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.recorded_pairs() {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out
    }

    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for (k, v) in self.recorded_pairs() {
            h.update(format!("{k}={v}\n").as_bytes());
        }
        format!("{:x}", h.finalize())
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Malformed {
                line: i + 1,
                message: format!("expected key = value, got {raw:?}"),
            })?;
            self.set(k.trim(), v.trim())
                .map_err(|e| Error::Config(format!("line {}: {e}", i + 1)))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.apply_text(&text)
    }

    /// Resolves defaults, an optional config file, the seed variable and
    /// flag overrides.
    pub fn resolve(file: Option<&Path>, env_seed: Option<&str>, flags: &[(String, String)]) -> Result<Self> {
        let mut config = RunConfig::default();
        if let Some(path) = file {
            config.apply_file(path)?;
        }
        if let Some(seed) = env_seed {
            config.set("seed", seed)?;
        }
        for (k, v) in flags {
            config.set(k, v)?;
        }
        Ok(config)
    }

    /// Training configuration with run seeds derived from the master seed.
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            scheme: self.scheme,
            seeds: run_seeds(derive_seed(self.seed, "train"), self.runs.max(1)),
            ..self.training.clone()
        }
    }

    pub fn sub_seed(&self, tag: &str) -> u64 {
        derive_seed(self.seed, tag)
    }
}
