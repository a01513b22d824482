//! Diagnostic classifiers over frozen mention representations.

mod baselines;
mod logistic;

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, CorpusSplit};
use crate::error::{Error, Result};
use crate::features::{Categorical, CorpusFeatures, FeatureTable, FeatureVector};
use crate::models::{embed_representations, Model};
use crate::seed::{derive_seed, run_seeds};

pub use baselines::{majority_label, run_baselines, Baselines, Score};
pub use logistic::{train_probe, LogisticProbe, ProbeConfig, ProbeInit, ProbeTrace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ProbeTask {
    DisStat,
    SenStat,
    Syn,
    DistAnt,
    IntRef,
    LocPro,
    GloPro,
    MetaPro,
}

impl ProbeTask {
    pub const ALL: [ProbeTask; 8] = [
        ProbeTask::DisStat,
        ProbeTask::SenStat,
        ProbeTask::Syn,
        ProbeTask::DistAnt,
        ProbeTask::IntRef,
        ProbeTask::LocPro,
        ProbeTask::GloPro,
        ProbeTask::MetaPro,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ProbeTask::DisStat => "DisStat",
            ProbeTask::SenStat => "SenStat",
            ProbeTask::Syn => "Syn",
            ProbeTask::DistAnt => "DistAnt",
            ProbeTask::IntRef => "IntRef",
            ProbeTask::LocPro => "LocPro",
            ProbeTask::GloPro => "GloPro",
            ProbeTask::MetaPro => "MetaPro",
        }
    }

    pub fn class_names(self) -> &'static [&'static str] {
        use crate::corpus::Syn;
        use crate::features::*;
        match self {
            ProbeTask::DisStat => DisStat::NAMES,
            ProbeTask::SenStat => SenStat::NAMES,
            ProbeTask::Syn => Syn::NAMES,
            ProbeTask::DistAnt => DistAnt::NAMES,
            ProbeTask::IntRef => IntRef::NAMES,
            ProbeTask::LocPro | ProbeTask::GloPro => Prominence::NAMES,
            ProbeTask::MetaPro => MetaPro::NAMES,
        }
    }

    pub fn class_count(self) -> usize {
        self.class_names().len()
    }

    pub fn label(self, f: &FeatureVector) -> usize {
        match self {
            ProbeTask::DisStat => f.dis_stat.index(),
            ProbeTask::SenStat => f.sen_stat.index(),
            ProbeTask::Syn => f.syn.index(),
            ProbeTask::DistAnt => f.dist_ant.index(),
            ProbeTask::IntRef => f.int_ref.index(),
            ProbeTask::LocPro => f.loc_pro.index(),
            ProbeTask::GloPro => f.glo_pro.index(),
            ProbeTask::MetaPro => f.meta_pro.index(),
        }
    }

    pub fn labels(self, table: &FeatureTable) -> Vec<usize> {
        table.vectors().map(|f| self.label(f)).collect()
    }
}

impl std::str::FromStr for ProbeTask {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ProbeTask::ALL
            .into_iter()
            .find(|t| t.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown probing task {s:?}")))
    }
}

/// Which splits the probes are fitted on and scored on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ProbeSplit {
    #[default]
    TrainTest,
    TrainDev,
}

impl ProbeSplit {
    pub fn name(self) -> &'static str {
        match self {
            ProbeSplit::TrainTest => "train_test",
            ProbeSplit::TrainDev => "train_dev",
        }
    }
}

impl std::str::FromStr for ProbeSplit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train_test" => Ok(ProbeSplit::TrainTest),
            "train_dev" => Ok(ProbeSplit::TrainDev),
            _ => Err(Error::Config(format!("unknown probe split {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProbeSuiteConfig {
    pub probe: ProbeConfig,
    pub seeds: Vec<u64>,
    pub split: ProbeSplit,
    pub tasks: Vec<ProbeTask>,
    /// Also fit probes on training labels shuffled against representations.
    pub shuffled_control: bool,
    /// Also probe a freshly initialized model of the same configuration.
    pub untrained_control: bool,
}

impl Default for ProbeSuiteConfig {
    fn default() -> Self {
        ProbeSuiteConfig {
            probe: ProbeConfig::default(),
            seeds: run_seeds(crate::training::DEFAULT_MASTER_SEED, 5),
            split: ProbeSplit::TrainTest,
            tasks: ProbeTask::ALL.to_vec(),
            shuffled_control: true,
            untrained_control: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskResult {
    pub task: ProbeTask,
    pub classes: usize,
    /// Random baseline averaged over the seeds.
    pub random: Score,
    pub majority: Score,
    pub probe: Score,
    pub probe_runs: Vec<Score>,
    pub shuffled: Option<Score>,
    pub untrained: Option<Score>,
    /// Probes whose gradient norm reached the tolerance.
    pub converged_runs: usize,
    /// Training labels had one class, so every probe is that constant.
    pub single_class: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub split: ProbeSplit,
    pub seeds: Vec<u64>,
    pub tasks: Vec<TaskResult>,
}

impl ProbeReport {
    pub fn task(&self, task: ProbeTask) -> Option<&TaskResult> {
        self.tasks.iter().find(|t| t.task == task)
    }
}

fn to_rows(reps: Vec<crate::models::Representation>) -> Vec<Vec<f64>> {
    reps.into_iter().map(|r| r.values).collect()
}

struct Probed {
    score: Score,
    converged: bool,
}

fn fit_and_score(
    train_x: &[Vec<f64>],
    train_y: &[usize],
    eval_x: &[Vec<f64>],
    eval_y: &[usize],
    classes: usize,
    config: &ProbeConfig,
    seed: u64,
) -> Result<Probed> {
    if train_y.iter().all(|&y| y == train_y[0]) {
        // Nothing to fit: the only sensible probe is the constant one.
        let predicted = vec![train_y[0]; eval_y.len()];
        return Ok(Probed {
            score: Score::of(classes, eval_y, &predicted)?,
            converged: true,
        });
    }
    let (probe, trace) = train_probe(train_x, train_y, classes, config, seed)?;
    let predicted = probe.predict_all(eval_x)?;
    Ok(Probed {
        score: Score::of(classes, eval_y, &predicted)?,
        converged: trace.converged,
    })
}

/// Representation tables of `model` for the probe's fitting and scoring
/// splits.
fn representations(model: &Model, fit: &CorpusSplit, eval: &CorpusSplit) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    Ok((
        to_rows(embed_representations(model, fit)?),
        to_rows(embed_representations(model, eval)?),
    ))
}

/// Probes `model` on every configured task and seed, with baselines and
/// the optional controls.
pub fn run_probe_suite(
    model: &Model,
    corpus: &Corpus,
    features: &CorpusFeatures,
    config: &ProbeSuiteConfig,
) -> Result<ProbeReport> {
    config.probe.validate()?;
    if config.seeds.is_empty() {
        return Err(Error::Config("probe suite needs at least one seed".into()));
    }
    if config.tasks.is_empty() {
        return Err(Error::Config("probe suite needs at least one task".into()));
    }
    let (eval_split, eval_table) = match config.split {
        ProbeSplit::TrainTest => (&corpus.test, &features.test),
        ProbeSplit::TrainDev => (&corpus.dev, &features.dev),
    };
    if features.train.len() != corpus.train.mention_count() || eval_table.len() != eval_split.mention_count() {
        return Err(Error::Shape("feature tables do not match the corpus".into()));
    }
    let (train_x, eval_x) = representations(model, &corpus.train, eval_split)?;
    let untrained = if config.untrained_control {
        let fresh = Model::new(
            model.config().clone(),
            model.scheme(),
            model.vocab().clone(),
            derive_seed(model.seed(), "probe/untrained"),
        )?;
        Some(representations(&fresh, &corpus.train, eval_split)?)
    } else {
        None
    };

    let tasks: Vec<Result<TaskResult>> = config
        .tasks
        .par_iter()
        .map(|&task| {
            let k = task.class_count();
            let train_y = task.labels(&features.train);
            let eval_y = task.labels(eval_table);
            let per_seed: Vec<Result<(Probed, Score, Option<Score>, Option<Score>)>> = config
                .seeds
                .par_iter()
                .map(|&seed| {
                    let tag = |what: &str| derive_seed(seed, &format!("probe/{}/{what}", task.name()));
                    let probed = fit_and_score(&train_x, &train_y, &eval_x, &eval_y, k, &config.probe, tag("init"))?;
                    let random = run_baselines(&train_y, &eval_y, k, tag("random"))?.random;
                    let shuffled = if config.shuffled_control {
                        let mut y = train_y.clone();
                        y.shuffle(&mut ChaCha8Rng::seed_from_u64(tag("shuffle")));
                        Some(fit_and_score(&train_x, &y, &eval_x, &eval_y, k, &config.probe, tag("init"))?.score)
                    } else {
                        None
                    };
                    let control = match &untrained {
                        Some((ux, uex)) => {
                            Some(fit_and_score(ux, &train_y, uex, &eval_y, k, &config.probe, tag("init"))?.score)
                        }
                        None => None,
                    };
                    Ok((probed, random, shuffled, control))
                })
                .collect();
            let mut runs = Vec::new();
            let mut randoms = Vec::new();
            let mut shuffled = Vec::new();
            let mut control = Vec::new();
            let mut converged_runs = 0;
            for r in per_seed {
                let (p, rnd, sh, un) = r?;
                converged_runs += usize::from(p.converged);
                runs.push(p.score);
                randoms.push(rnd);
                shuffled.extend(sh);
                control.extend(un);
            }
            let majority = run_baselines(&train_y, &eval_y, k, 0)?.majority;
            Ok(TaskResult {
                task,
                classes: k,
                random: Score::mean(&randoms),
                majority,
                probe: Score::mean(&runs),
                probe_runs: runs,
                shuffled: (!shuffled.is_empty()).then(|| Score::mean(&shuffled)),
                untrained: (!control.is_empty()).then(|| Score::mean(&control)),
                converged_runs,
                single_class: train_y.iter().all(|&y| y == train_y[0]),
            })
        })
        .collect();
    Ok(ProbeReport {
        split: config.split,
        seeds: config.seeds.clone(),
        tasks: tasks.into_iter().collect::<Result<_>>()?,
    })
}

fn cell(s: &Score) -> String {
    format!("{:.2}({:.2})", 100.0 * s.accuracy, 100.0 * s.macro_f1)
}

/// Aligned grid: one row per system, one column per task, cells
/// `accuracy(macro-F1)` in percent.
pub fn probe_grid(report: &ProbeReport) -> String {
    let mut rows: Vec<(&str, Vec<String>)> = vec![
        ("Random", report.tasks.iter().map(|t| cell(&t.random)).collect()),
        ("Majority", report.tasks.iter().map(|t| cell(&t.majority)).collect()),
        ("Probe", report.tasks.iter().map(|t| cell(&t.probe)).collect()),
    ];
    if report.tasks.iter().all(|t| t.shuffled.is_some()) {
        rows.push((
            "Shuffled",
            report
                .tasks
                .iter()
                .map(|t| cell(t.shuffled.as_ref().unwrap()))
                .collect(),
        ));
    }
    if report.tasks.iter().all(|t| t.untrained.is_some()) {
        rows.push((
            "Untrained",
            report
                .tasks
                .iter()
                .map(|t| cell(t.untrained.as_ref().unwrap()))
                .collect(),
        ));
    }
    let header: Vec<&str> = report.tasks.iter().map(|t| t.task.name()).collect();
    let width = rows
        .iter()
        .flat_map(|(_, c)| c.iter().map(String::len))
        .chain(header.iter().map(|h| h.len()))
        .max()
        .unwrap_or(0);
    let mut out = format!("{:<10}", "");
    for h in &header {
        let _ = write!(out, " {h:>width$}");
    }
    out.push('\n');
    for (name, cells) in rows {
        let _ = write!(out, "{name:<10}");
        for c in cells {
            let _ = write!(out, " {c:>width$}");
        }
        out.push('\n');
    }
    out
}
