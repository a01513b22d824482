//! The `refsel` command line.
//!
//! Every subcommand takes `--config FILE` (a `key = value` file, or the
//! `manifest.json` of an earlier run) followed by any number of
//! `--key value` overrides. A bare argument sets `file`.

mod artifacts;
mod commands;
mod config;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};

pub use artifacts::{read_manifest, verify, RunManifest, MANIFEST, RUN_CONFIG};
pub use config::{FeatureChoice, RunConfig, SEED_ENV};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "refsel", version, about = "Referential form selection toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Corpus utilities.
    #[command(subcommand)]
    Corpus(CorpusCommand),
    /// Train one model per run seed and save checkpoints.
    Train(Options),
    /// Score a saved model on one split.
    Evaluate(Options),
    /// Fit diagnostic probes on a saved model's representations.
    Probe(Options),
    /// Feature-based classifier and feature importance.
    #[command(subcommand)]
    Importance(ImportanceCommand),
    /// Finite-difference checks of every layer and both architectures.
    Gradcheck(Options),
    /// Verify an output directory against its manifest and summarize it.
    Report(Options),
}

#[derive(Subcommand, Debug)]
enum CorpusCommand {
    /// Parse a corpus file and check every record invariant.
    Validate(Options),
    /// Print corpus statistics.
    Stats(Options),
    /// Write a synthetic corpus with planted form rules.
    Synth(Options),
}

#[derive(Subcommand, Debug)]
enum ImportanceCommand {
    /// Permutation importance on the test split.
    Permute(Options),
    /// Sampled Shapley attribution for one test mention.
    Shapley(Options),
}

#[derive(Args, Debug)]
struct Options {
    /// Configuration file or manifest.json.
    #[arg(long)]
    config: Option<PathBuf>,
    /// `--key value` overrides and an optional bare path.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, num_args = 0.., value_name = "ARGS")]
    rest: Vec<String>,
}

/// Splits `--key value`, `--key=value` and bare arguments into overrides.
/// A flag followed by another flag, or by nothing, is set to `true`.
fn parse_overrides(rest: &[String]) -> Result<(Option<PathBuf>, Vec<(String, String)>)> {
    let mut config = None;
    let mut pairs = Vec::new();
    let mut i = 0;
    while i < rest.len() {
        let arg = &rest[i];
        i += 1;
        let Some(flag) = arg.strip_prefix("--") else {
            pairs.push(("file".to_string(), arg.clone()));
            continue;
        };
        let (key, value) = match flag.split_once('=') {
            Some((k, v)) => (k.to_string(), v.to_string()),
            None => {
                let value = match rest.get(i) {
                    Some(next) if !next.starts_with("--") => {
                        i += 1;
                        next.clone()
                    }
                    _ => "true".to_string(),
                };
                (flag.to_string(), value)
            }
        };
        let key = key.replace('-', "_");
        if key.is_empty() {
            return Err(Error::Config(format!("malformed flag {arg:?}")));
        }
        if key == "config" {
            config = Some(PathBuf::from(value));
        } else {
            pairs.push((key, value));
        }
    }
    Ok((config, pairs))
}

fn resolve(options: &Options) -> Result<RunConfig> {
    let (late_config, flags) = parse_overrides(&options.rest)?;
    let file = options.config.clone().or(late_config);
    let env_seed = std::env::var(SEED_ENV).ok();
    let mut config = RunConfig::default();
    if let Some(path) = &file {
        if path.extension().is_some_and(|e| e == "json") {
            let manifest = read_manifest(path)?;
            for (k, v) in &manifest.config {
                config.set(k, v)?;
            }
        } else {
            config.apply_file(path)?;
        }
    }
    if let Some(seed) = env_seed.as_deref() {
        config.set("seed", seed)?;
    }
    for (k, v) in &flags {
        config.set(k, v)?;
    }
    Ok(config)
}

pub fn exit_code(error: &Error) -> i32 {
    match error {
        Error::Invariant { .. } | Error::Malformed { .. } | Error::DuplicateDoc(_) | Error::EmptySplit => {
            EXIT_VALIDATION
        }
        Error::Numerical(_) => EXIT_NUMERICAL,
        _ => EXIT_USAGE,
    }
}

fn dispatch(command: Command) -> Result<i32> {
    use commands as c;
    let (options, run): (Options, fn(&RunConfig) -> Result<i32>) = match command {
        Command::Corpus(CorpusCommand::Validate(o)) => (o, c::corpus_validate),
        Command::Corpus(CorpusCommand::Stats(o)) => (o, c::corpus_stats),
        Command::Corpus(CorpusCommand::Synth(o)) => (o, c::corpus_synth),
        Command::Train(o) => (o, c::train),
        Command::Evaluate(o) => (o, c::evaluate),
        Command::Probe(o) => (o, c::probe),
        Command::Importance(ImportanceCommand::Permute(o)) => (o, c::importance_permute),
        Command::Importance(ImportanceCommand::Shapley(o)) => (o, c::importance_shapley),
        Command::Gradcheck(o) => (o, c::gradcheck),
        Command::Report(o) => (o, c::report),
    };
    let config = resolve(&options)?;
    match config.jobs {
        Some(jobs) => rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build()
            .map_err(|e| Error::Config(format!("jobs: {e}")))?
            .install(|| run(&config)),
        None => run(&config),
    }
}

/// Runs the command line given by `argv` (program name first) and returns
/// the process exit code.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strings(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn overrides_forms() {
        let (cfg, pairs) = parse_overrides(&strings(&[
            "data.jsonl",
            "--embed-dim",
            "8",
            "--lr=0.1",
            "--probe.standardize",
            "--config",
            "a.cfg",
        ]))
        .unwrap();
        assert_eq!(cfg, Some(PathBuf::from("a.cfg")));
        let want: Vec<(String, String)> = [
            ("file", "data.jsonl"),
            ("embed_dim", "8"),
            ("lr", "0.1"),
            ("probe.standardize", "true"),
        ]
        .iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();
        assert_eq!(pairs, want);
    }

    #[test]
    fn clap_passes_flags_through() {
        let cli =
            Cli::try_parse_from(["refsel", "train", "--config", "x.cfg", "--epochs", "3", "--hidden", "4"]).unwrap();
        let Command::Train(o) = cli.command else { panic!() };
        assert_eq!(o.config, Some(PathBuf::from("x.cfg")));
        assert_eq!(o.rest, strings(&["--epochs", "3", "--hidden", "4"]));
        assert!(Cli::try_parse_from(["refsel", "frobnicate"]).is_err());
    }

    #[test]
    fn error_classes() {
        assert_eq!(exit_code(&Error::Config("x".into())), EXIT_USAGE);
        assert_eq!(exit_code(&Error::EmptySplit), EXIT_VALIDATION);
        assert_eq!(
            exit_code(&Error::Malformed {
                line: 1,
                message: "x".into()
            }),
            EXIT_VALIDATION
        );
        assert_eq!(exit_code(&Error::Numerical("nan".into())), EXIT_NUMERICAL);
    }
}
