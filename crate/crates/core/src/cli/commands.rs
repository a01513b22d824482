use std::path::{Path, PathBuf};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::artifacts::{read_manifest, verify, OutputDir, MANIFEST};
use super::config::{FeatureChoice, RunConfig};
use super::{EXIT_NUMERICAL, EXIT_OK, EXIT_VALIDATION};
use crate::corpus::{
    corpus_stats as stats_of, parse_corpus, parse_metadata, serialize_split, synthesize_corpus, write_metadata, Corpus,
    CorpusSplit, MetaTable, SplitName,
};
use crate::error::{Error, Result};
use crate::features::{extract_corpus, CorpusFeatures};
use crate::importance::{
    encode, permutation_importance, permutation_svg, permutation_tsv, shapley_sample, shapley_svg, shapley_tsv,
    train_gbdt, EncodedTable, Feature, GbdtConfig, TrainedGbdt,
};
use crate::models::{gradcheck_suite, load_model, save_model, Model, Vocabulary, MANIFEST_FILE, PARAMS_FILE};
use crate::probing::{probe_grid, run_probe_suite, ProbeSuiteConfig, ProbeTask};
use crate::seed::run_seeds;
use crate::training::{
    confusion_svg, confusion_tsv, evaluate as evaluate_split, gold_labels, metrics_text, protocol_text, run_protocol,
};

fn required<'a>(value: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
    value
        .as_deref()
        .ok_or_else(|| Error::Config(format!("{key} is required (--{key} PATH)")))
}

fn output_dir(config: &RunConfig) -> Result<OutputDir> {
    OutputDir::create(required(&config.out, "out")?)
}

/// Parse errors are reported with the offending file.
fn parse_split(path: &Path, name: SplitName) -> Result<CorpusSplit> {
    parse_corpus(path, name).inspect_err(|e| eprintln!("{}: {e}", path.display()))
}

fn load_corpus(config: &RunConfig) -> Result<Corpus> {
    Corpus::new(
        parse_split(required(&config.train, "train")?, SplitName::Train)?,
        parse_split(required(&config.dev, "dev")?, SplitName::Dev)?,
        parse_split(required(&config.test, "test")?, SplitName::Test)?,
    )
}

fn load_meta(config: &RunConfig) -> Result<MetaTable> {
    parse_metadata(required(&config.meta, "meta")?)
}

fn load_features(config: &RunConfig) -> Result<(Corpus, CorpusFeatures)> {
    let corpus = load_corpus(config)?;
    let meta = load_meta(config)?;
    let features = extract_corpus(&corpus, &meta, config.count_scope)?;
    Ok((corpus, features))
}

/// Loads the checkpoint and returns the configuration with the model's own
/// scheme and architecture settings, so the recorded run config is truthful.
fn load_checkpoint(config: &RunConfig) -> Result<(Model, RunConfig)> {
    let model = load_model(required(&config.model, "model")?)?;
    if config.is_explicit("scheme") && config.scheme != model.scheme() {
        return Err(Error::Config(format!(
            "scheme {} does not match the model's {}",
            config.scheme.name(),
            model.scheme().name()
        )));
    }
    if config.is_explicit("arch") && config.training.model.architecture != model.config().architecture {
        return Err(Error::Config(format!(
            "arch {} does not match the model's {}",
            config.training.model.architecture.name(),
            model.config().architecture.name()
        )));
    }
    let mut config = config.clone();
    config.scheme = model.scheme();
    config.training.model = model.config().clone();
    Ok((model, config))
}

pub fn corpus_validate(config: &RunConfig) -> Result<i32> {
    let path = required(&config.file, "file")?;
    let split = parse_split(path, SplitName::Train)?;
    if let Some(meta) = &config.meta {
        parse_metadata(meta)?;
    }
    println!(
        "ok {}: {} documents, {} mentions",
        path.display(),
        split.documents.len(),
        split.mention_count()
    );
    Ok(EXIT_OK)
}

pub fn corpus_stats(config: &RunConfig) -> Result<i32> {
    let path = required(&config.file, "file")?;
    let stats = stats_of(&parse_split(path, SplitName::Train)?)?;
    print!("{}", stats.to_text());
    if config.out.is_some() {
        let mut out = output_dir(config)?;
        out.write_json("stats.json", &stats)?;
        out.write("stats.txt", stats.to_text())?;
        out.finish("corpus stats", config)?;
    }
    Ok(EXIT_OK)
}

pub fn corpus_synth(config: &RunConfig) -> Result<i32> {
    let mut out = output_dir(config)?;
    let synth = synthesize_corpus(&config.synth, config.sub_seed("synth"))?;
    let c = &synth.corpus;
    for split in [&c.train, &c.dev, &c.test] {
        out.write(&format!("{}.jsonl", split.name.name()), serialize_split(split))?;
    }
    write_metadata(out.path("meta.json"), &synth.meta)?;
    out.record("meta.json")?;
    out.finish("corpus synth", config)?;
    println!(
        "wrote {} / {} / {} documents",
        c.train.documents.len(),
        c.dev.documents.len(),
        c.test.documents.len()
    );
    Ok(EXIT_OK)
}

pub fn train(config: &RunConfig) -> Result<i32> {
    let corpus = load_corpus(config)?;
    let mut out = output_dir(config)?;
    let vocab = Vocabulary::fit(&corpus.train)?;
    let outcome = run_protocol(&config.train_config(), &corpus, &vocab)?;
    let report = &outcome.report;
    out.write_json("protocol.json", report)?;
    out.write("protocol.txt", protocol_text(report))?;
    for (i, model) in outcome.models.iter().enumerate() {
        save_run(&mut out, &format!("models/run{i}"), model)?;
    }
    save_run(&mut out, "model", &outcome.models[report.best_run])?;
    out.finish("train", config)?;
    print!("{}", protocol_text(report));
    let diverged: Vec<u64> = report
        .runs
        .iter()
        .filter(|r| r.log.diverged.is_some())
        .map(|r| r.seed)
        .collect();
    if !diverged.is_empty() {
        eprintln!("error: training diverged for seeds {diverged:?}");
        return Ok(EXIT_NUMERICAL);
    }
    Ok(EXIT_OK)
}

fn save_run(out: &mut OutputDir, name: &str, model: &Model) -> Result<()> {
    save_model(model, out.path(name))?;
    for f in [MANIFEST_FILE, PARAMS_FILE] {
        out.record(&format!("{name}/{f}"))?;
    }
    Ok(())
}

pub fn evaluate(config: &RunConfig) -> Result<i32> {
    let (model, config) = load_checkpoint(config)?;
    let config = &config;
    let path = match &config.file {
        Some(p) => p.as_path(),
        None => match config.split {
            SplitName::Train => required(&config.train, "train")?,
            SplitName::Dev => required(&config.dev, "dev")?,
            SplitName::Test => required(&config.test, "test")?,
        },
    };
    let split = parse_split(path, config.split)?;
    let metrics = evaluate_split(&model, &split)?;
    let mut out = output_dir(config)?;
    out.write_json("metrics.json", &metrics)?;
    out.write("metrics.txt", metrics_text(&metrics))?;
    out.write("confusion.tsv", confusion_tsv(&metrics))?;
    let title = format!(
        "{} {} confusion",
        model.config().architecture.name(),
        model.scheme().name()
    );
    out.write("confusion.svg", confusion_svg(&title, &metrics))?;
    out.finish("evaluate", config)?;
    print!("{}", metrics_text(&metrics));
    Ok(EXIT_OK)
}

pub fn probe(config: &RunConfig) -> Result<i32> {
    let (model, config) = load_checkpoint(config)?;
    let config = &config;
    let (corpus, features) = load_features(config)?;
    let suite = ProbeSuiteConfig {
        probe: config.probe,
        seeds: run_seeds(config.sub_seed("probe"), config.probe_runs.max(1)),
        split: config.probe_split,
        tasks: ProbeTask::ALL.to_vec(),
        shuffled_control: config.probe_shuffled,
        untrained_control: config.probe_untrained,
    };
    let report = run_probe_suite(&model, &corpus, &features, &suite)?;
    let grid = probe_grid(&report);
    let mut out = output_dir(config)?;
    out.write_json("probe.json", &report)?;
    out.write("probe_grid.txt", &grid)?;
    out.finish("probe", config)?;
    print!("{grid}");
    Ok(EXIT_OK)
}

struct Prepared {
    trained: TrainedGbdt,
    class_names: &'static [&'static str],
    fit: EncodedTable,
    test: EncodedTable,
    test_labels: Vec<usize>,
}

/// Encodes the chosen features, then fits the classifier on train and dev
/// with cross-validation.
fn prepare_gbdt(config: &RunConfig) -> Result<Prepared> {
    let (corpus, features) = load_features(config)?;
    let chosen = match config.features {
        FeatureChoice::Scheme => Feature::for_scheme(config.scheme),
        FeatureChoice::Probing => Feature::probing(),
    };
    let fit = encode(&chosen, features.train.vectors().chain(features.dev.vectors()))?;
    let mut labels = gold_labels(&corpus.train, config.scheme);
    labels.extend(gold_labels(&corpus.dev, config.scheme));
    let test = encode(&chosen, features.test.vectors())?;
    let test_labels = gold_labels(&corpus.test, config.scheme);
    let class_names = config.scheme.class_names();
    let gbdt = GbdtConfig {
        seed: config.sub_seed("gbdt"),
        ..config.gbdt.clone()
    };
    let trained = train_gbdt(&fit, &labels, class_names, &gbdt)?;
    Ok(Prepared {
        trained,
        class_names,
        fit,
        test,
        test_labels,
    })
}

fn write_gbdt(out: &mut OutputDir, prepared: &Prepared) -> Result<()> {
    out.write_json("gbdt.json", &prepared.trained.model)?;
    out.write_json("cv.json", &prepared.trained.cv)?;
    Ok(())
}

pub fn importance_permute(config: &RunConfig) -> Result<i32> {
    let prepared = prepare_gbdt(config)?;
    let report = permutation_importance(
        &prepared.trained.model,
        &prepared.test,
        &prepared.test_labels,
        config.repetitions,
        config.sub_seed("permute"),
    )?;
    let tsv = permutation_tsv(&report);
    let mut out = output_dir(config)?;
    write_gbdt(&mut out, &prepared)?;
    out.write_json("permutation.json", &report)?;
    out.write("importance.tsv", &tsv)?;
    let title = format!("Permutation importance ({})", config.scheme.name());
    out.write("importance.svg", permutation_svg(&title, &report))?;
    out.finish("importance permute", config)?;
    println!("cv macro-F1 {:.4}", prepared.trained.cv.mean.macro_f1);
    print!("{tsv}");
    Ok(EXIT_OK)
}

pub fn importance_shapley(config: &RunConfig) -> Result<i32> {
    let prepared = prepare_gbdt(config)?;
    let instance = prepared
        .test
        .rows
        .get(config.shapley_instance)
        .ok_or(Error::IndexOutOfRange {
            index: config.shapley_instance,
            len: prepared.test.len(),
        })?;
    let background = if prepared.fit.len() > config.background_rows {
        let mut rng = ChaCha8Rng::seed_from_u64(config.sub_seed("shapley/background"));
        let mut picked = sample(&mut rng, prepared.fit.len(), config.background_rows.max(1)).into_vec();
        picked.sort_unstable();
        prepared.fit.select(&picked)
    } else {
        prepared.fit.clone()
    };
    let report = shapley_sample(
        &prepared.trained.model,
        instance,
        &background,
        &config.shapley,
        config.sub_seed("shapley"),
    )?;
    let mut out = output_dir(config)?;
    write_gbdt(&mut out, &prepared)?;
    out.write_json("shapley.json", &report)?;
    out.write("shapley.tsv", shapley_tsv(&report))?;
    let title = format!(
        "Shapley contributions to P({}) for test mention {}",
        prepared.class_names[report.class], config.shapley_instance
    );
    out.write("shapley.svg", shapley_svg(&title, &report))?;
    out.finish("importance shapley", config)?;
    println!(
        "explained class {}: f(x) {:.4}, background mean {:.4}, total {:.4} (se {:.4})",
        prepared.class_names[report.class],
        report.instance_output,
        report.background_mean_output,
        report.total(),
        report.total_standard_error()
    );
    for e in &report.features {
        println!("{}\t{:.6}\t{:.6}", e.feature, e.mean, e.std);
    }
    Ok(EXIT_OK)
}

pub fn gradcheck(config: &RunConfig) -> Result<i32> {
    let reports = gradcheck_suite(config.seed, config.gradcheck_tolerance)?;
    let mut text = String::new();
    for r in &reports {
        text.push_str(&r.to_text());
    }
    let worst = reports.iter().map(|r| r.max_relative_error).fold(0.0, f64::max);
    let passed = reports.iter().all(|r| r.passed);
    text.push_str(&format!(
        "max relative error {worst:.3e} (tolerance {:.1e}): {}\n",
        config.gradcheck_tolerance,
        if passed { "pass" } else { "FAIL" }
    ));
    print!("{text}");
    if config.out.is_some() {
        let mut out = output_dir(config)?;
        out.write_json("gradcheck.json", &reports)?;
        out.write("gradcheck.txt", &text)?;
        out.finish("gradcheck", config)?;
    }
    Ok(if passed { EXIT_OK } else { EXIT_NUMERICAL })
}

pub fn report(config: &RunConfig) -> Result<i32> {
    let dir = config
        .file
        .as_deref()
        .or(config.out.as_deref())
        .ok_or_else(|| Error::Config("report needs a directory (refsel report DIR)".into()))?;
    let manifest = read_manifest(&dir.join(MANIFEST))?;
    println!(
        "{}: {} (seed {}, config {})",
        dir.display(),
        manifest.command,
        manifest.seed,
        &manifest.config_hash[..12]
    );
    let changed = verify(dir, &manifest)?;
    for name in [
        "protocol.txt",
        "metrics.txt",
        "probe_grid.txt",
        "importance.tsv",
        "stats.txt",
        "gradcheck.txt",
    ] {
        if manifest.artifacts.contains_key(name) {
            let text = std::fs::read_to_string(dir.join(name)).map_err(|e| Error::io(dir.join(name), e))?;
            print!("\n{name}\n{text}");
        }
    }
    if changed.is_empty() {
        println!("\n{} artifacts match the manifest", manifest.artifacts.len());
        Ok(EXIT_OK)
    } else {
        for name in &changed {
            eprintln!("changed or missing: {name}");
        }
        Ok(EXIT_VALIDATION)
    }
}
