use super::*;
use crate::corpus::{synthesize_corpus, SynthConfig};

fn tiny_setup() -> (Corpus, Vocabulary, TrainConfig) {
    let synth = synthesize_corpus(
        &SynthConfig {
            documents: 40,
            entities: 6,
            ..SynthConfig::default()
        },
        3,
    )
    .unwrap();
    let vocab = Vocabulary::fit(&synth.corpus.train).unwrap();
    let config = TrainConfig {
        scheme: LabelScheme::TwoWay,
        model: ModelConfig {
            architecture: Architecture::CRnn,
            embed_dim: 4,
            hidden: 4,
            attn_dim: 4,
            repr_dim: 4,
            max_context: 10,
            ..ModelConfig::default()
        },
        epochs: 3,
        batch_size: 16,
        optimizer: OptimizerConfig {
            learning_rate: 0.01,
            ..OptimizerConfig::default()
        },
        patience: 5,
        seeds: run_seeds(1, 2),
        embeddings: None,
    };
    (synth.corpus, vocab, config)
}

#[test]
fn same_seed_gives_identical_parameters() {
    let (corpus, vocab, config) = tiny_setup();
    let a = train(&config, 5, &corpus, &vocab).unwrap();
    let b = train(&config, 5, &corpus, &vocab).unwrap();
    assert_eq!(a.model.store(), b.model.store());
    assert_eq!(a.log, b.log);
    let c = train(&config, 6, &corpus, &vocab).unwrap();
    assert_ne!(a.model.store(), c.model.store());
}

#[test]
fn patience_zero_stops_after_first_non_improving_epoch() {
    let (corpus, vocab, mut config) = tiny_setup();
    config.patience = 0;
    config.epochs = 12;
    config.optimizer.learning_rate = 1e-6;
    let out = train(&config, 1, &corpus, &vocab).unwrap();
    let log = &out.log;
    let first_bad = log
        .epochs
        .windows(2)
        .position(|w| {
            let best_so_far = w[0].dev_macro_f1;
            w[1].dev_macro_f1 <= best_so_far
        })
        .map(|i| i + 2);
    if let Some(stop) = first_bad {
        assert_eq!(log.epochs.len(), stop);
        assert!(log.stopped_early || stop == config.epochs);
    }
    assert!(log.epochs.iter().all(|e| e.train_loss.is_finite()));
}

#[test]
fn best_epoch_parameters_are_returned() {
    let (corpus, vocab, config) = tiny_setup();
    let out = train(&config, 2, &corpus, &vocab).unwrap();
    let dev = evaluate(&out.model, &corpus.dev).unwrap();
    assert_eq!(dev.macro_f1, out.log.best_dev_macro_f1);
    let best = out
        .log
        .epochs
        .iter()
        .map(|e| e.dev_macro_f1)
        .fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(best, out.log.best_dev_macro_f1);
}

#[test]
fn empty_splits_and_bad_config_rejected() {
    let (corpus, vocab, mut config) = tiny_setup();
    let empty = Corpus::new(
        corpus.train.clone(),
        CorpusSplit::new(crate::corpus::SplitName::Dev, vec![]).unwrap(),
        corpus.test.clone(),
    )
    .unwrap();
    assert!(matches!(train(&config, 1, &empty, &vocab), Err(Error::EmptySplit)));
    config.epochs = 0;
    assert!(train(&config, 1, &corpus, &vocab).is_err());
}

#[test]
fn protocol_means_and_retained_matrices() {
    let (corpus, vocab, mut config) = tiny_setup();
    config.epochs = 1;
    config.seeds = run_seeds(9, 5);
    let out = run_protocol(&config, &corpus, &vocab).unwrap();
    let r = &out.report;
    assert_eq!(r.runs.len(), 5);
    assert_eq!(out.models.len(), 5);
    let mean: f64 = r.runs.iter().map(|x| x.test.macro_f1).sum::<f64>() / 5.0;
    assert_eq!(r.mean_test.macro_f1, mean);
    assert!(r.runs.iter().all(|x| x.test.confusion.k() == 2));
    let again = run_protocol(&config, &corpus, &vocab).unwrap();
    assert_eq!(
        serde_json::to_string(&again.report).unwrap(),
        serde_json::to_string(r).unwrap()
    );
    assert!(protocol_text(r).contains("mean"));
}

fn metrics_with_f1(f1: f64) -> Metrics {
    let mut m = Metrics::from_predictions(&["a", "b"], &[0, 1], &[0, 1]).unwrap();
    m.macro_f1 = f1;
    m
}

#[test]
fn protocol_mean_arithmetic() {
    let runs: Vec<SeedRun> = [0.8, 0.9, 0.7, 0.8, 0.8]
        .iter()
        .enumerate()
        .map(|(i, &f)| SeedRun {
            seed: i as u64,
            log: TrainingLog {
                seed: i as u64,
                epochs: vec![],
                best_epoch: 1,
                best_dev_macro_f1: f,
                stopped_early: false,
                diverged: None,
            },
            dev: metrics_with_f1(f),
            test: metrics_with_f1(f),
        })
        .collect();
    let r = ProtocolReport::from_runs(LabelScheme::TwoWay, Architecture::CRnn, runs).unwrap();
    assert!((r.mean_test.macro_f1 - 0.8).abs() < 1e-12);
    assert_eq!(r.best_run, 1);

    let same: Vec<SeedRun> = (0..5).map(|_| r.runs[0].clone()).collect();
    let d = ProtocolReport::from_runs(LabelScheme::TwoWay, Architecture::CRnn, same).unwrap();
    assert_eq!(d.mean_test.macro_f1, r.runs[0].test.macro_f1);
}

#[test]
fn report_renderings() {
    let m = Metrics::from_predictions(&["non-pronominal", "pronominal"], &[0, 0, 1, 1], &[0, 0, 1, 0]).unwrap();
    let tsv = confusion_tsv(&m);
    assert_eq!(tsv.lines().nth(2).unwrap(), "pronominal\t1\t1");
    assert!(metrics_text(&m).contains("macro"));
    assert!(confusion_svg("x", &m).contains("<svg"));
}
