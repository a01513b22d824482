use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::embeddings::apply_embeddings;
use super::*;
use crate::corpus::{fixtures::table1_document, SplitName};
use crate::numkernel::{bigru_encode, dense_relu, DEFAULT_TOLERANCE};

fn small_config(architecture: Architecture) -> ModelConfig {
    ModelConfig {
        architecture,
        embed_dim: 4,
        hidden: 3,
        attn_dim: 3,
        repr_dim: 5,
        max_context: 8,
        dense_bias: false,
        unk_fallback: true,
    }
}

fn small_vocab() -> Vocabulary {
    Vocabulary::from_tokens(["E0", "E1", "E2", "a", "b", "c", "."]).unwrap()
}

fn random_input(rng: &mut ChaCha8Rng, vocab: usize, max_len: usize) -> ModelInput {
    let side = |rng: &mut ChaCha8Rng| {
        let n = rng.random_range(0..=max_len);
        (0..n).map(|_| rng.random_range(1..vocab)).collect::<Vec<_>>()
    };
    ModelInput {
        pre_context: side(rng),
        target: rng.random_range(2..vocab),
        pos_context: side(rng),
    }
}

#[test]
fn gradcheck_suite_passes() {
    let reports = gradcheck_suite(7, DEFAULT_TOLERANCE).unwrap();
    assert_eq!(reports.len(), 7);
    for r in &reports {
        assert!(r.passed, "{}", r.to_text());
    }
}

#[test]
fn conatt_with_empty_contexts_uses_only_target() {
    let model = Model::new(
        small_config(Architecture::ConAtt),
        LabelScheme::TwoWay,
        small_vocab(),
        3,
    )
    .unwrap();
    let input = ModelInput {
        pre_context: vec![],
        target: 3,
        pos_context: vec![],
    };
    let (r, _) = forward_conatt(&model, &input).unwrap();
    let h = model.config().hidden;
    let mut x = vec![0.0; 4 * h + 4];
    x[2 * h..2 * h + 4].copy_from_slice(model.embedding_table().row(3));
    let want = dense_relu(model.store().get("w_f").unwrap(), &Tensor2::row_vector(&x).unwrap()).unwrap();
    assert_eq!(r.values, want.data());
    assert!(forward_crnn(&model, &input).is_err());
}

#[test]
fn forward_is_deterministic_across_calls_and_constructions() {
    for arch in [Architecture::ConAtt, Architecture::CRnn] {
        let a = Model::new(small_config(arch), LabelScheme::FourWay, small_vocab(), 11).unwrap();
        let b = Model::new(small_config(arch), LabelScheme::FourWay, small_vocab(), 11).unwrap();
        let input = random_input(&mut ChaCha8Rng::seed_from_u64(1), 9, 6);
        let first = a.forward(&input).unwrap();
        assert_eq!(first, a.forward(&input).unwrap());
        assert_eq!(first, b.forward(&input).unwrap());
        let c = Model::new(small_config(arch), LabelScheme::FourWay, small_vocab(), 12).unwrap();
        assert_ne!(first, c.forward(&input).unwrap());
    }
}

#[test]
fn crnn_reads_state_at_target_position() {
    let vocab = small_vocab();
    let model = Model::new(
        small_config(Architecture::CRnn),
        LabelScheme::ThreeWay,
        vocab.clone(),
        5,
    )
    .unwrap();
    let bigru = BiGru::lookup(model.store(), "seq.enc").unwrap();
    let marker = vocab.get("E2").unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..100 {
        let mut input = random_input(&mut rng, vocab.len(), 7);
        input.pre_context.retain(|&t| t != marker);
        input.pos_context.retain(|&t| t != marker);
        input.target = marker;
        let seq = input.concatenated();
        let position = seq.iter().position(|&t| t == marker).unwrap();
        assert_eq!(position, input.target_position());

        let rows: Vec<Tensor2> = seq
            .iter()
            .map(|&t| Tensor2::row_vector(model.embedding_table().row(t)).unwrap())
            .collect();
        let h = bigru_encode(model.store(), &bigru, &rows).unwrap();
        let want = dense_relu(model.store().get("w_f").unwrap(), &h[position]).unwrap();
        let (r, _) = forward_crnn(&model, &input).unwrap();
        for (a, b) in r.values.iter().zip(want.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn crnn_with_empty_contexts_is_single_step() {
    let model = Model::new(small_config(Architecture::CRnn), LabelScheme::TwoWay, small_vocab(), 5).unwrap();
    let input = ModelInput {
        pre_context: vec![],
        target: 2,
        pos_context: vec![],
    };
    assert_eq!(input.concatenated(), vec![2]);
    assert_eq!(input.target_position(), 0);
    let (r, p) = model.forward(&input).unwrap();
    assert_eq!(r.values.len(), 5);
    assert!((p.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
}

#[test]
fn unknown_ids_are_rejected() {
    let model = Model::new(
        small_config(Architecture::ConAtt),
        LabelScheme::TwoWay,
        small_vocab(),
        5,
    )
    .unwrap();
    let input = ModelInput {
        pre_context: vec![99],
        target: 2,
        pos_context: vec![],
    };
    assert!(matches!(model.forward(&input), Err(Error::UnknownToken(99))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn batching_does_not_change_rows(seed in 0u64..10_000, n in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inputs: Vec<ModelInput> = (0..n).map(|_| random_input(&mut rng, 9, 6)).collect();
        for arch in [Architecture::ConAtt, Architecture::CRnn] {
            let model = Model::new(small_config(arch), LabelScheme::FourWay, small_vocab(), seed).unwrap();
            let refs: Vec<&ModelInput> = inputs.iter().collect();
            let batched = model.predict_batch(&refs).unwrap();
            for (input, got) in inputs.iter().zip(&batched) {
                let alone = model.forward(input).unwrap();
                prop_assert_eq!(&alone, got);
                prop_assert!(got.0.values.iter().all(|&v| v >= 0.0));
                prop_assert!((got.1.probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                prop_assert!(got.1.probs.iter().all(|&p| p > 0.0));
            }
        }
    }

    #[test]
    fn argmax_ignores_logit_shift(logits in prop::collection::vec(-20f64..20.0, 2..6), shift in -100f64..100.0) {
        let a = FormDistribution { probs: crate::numkernel::softmax(&logits) };
        let shifted: Vec<f64> = logits.iter().map(|l| l + shift).collect();
        let b = FormDistribution { probs: crate::numkernel::softmax(&shifted) };
        prop_assert_eq!(a.argmax(), b.argmax());
    }
}

#[test]
fn embeddings_coverage_cases() {
    let vocab = small_vocab();
    let model = Model::new(small_config(Architecture::CRnn), LabelScheme::TwoWay, vocab.clone(), 1).unwrap();
    let original = model.embedding_table().clone();

    let mut t = original.clone();
    let r = apply_embeddings("zzz 1 2 3 4\n", &vocab, &mut t).unwrap();
    assert_eq!(r.covered, 0);
    assert_eq!(r.coverage, 0.0);
    assert_eq!(t, original);

    let mut t = original.clone();
    let r = apply_embeddings("2 4\na 1 2 3 4\n", &vocab, &mut t).unwrap();
    assert_eq!(r.covered, 1);
    let a = vocab.get("a").unwrap();
    assert_eq!(t.row(a), &[1.0, 2.0, 3.0, 4.0]);
    for i in (0..vocab.len()).filter(|&i| i != a) {
        assert_eq!(t.row(i), original.row(i));
    }

    let mut t = original.clone();
    let r = apply_embeddings("b 1 1 1 1\nb 2 2 2 2\n", &vocab, &mut t).unwrap();
    assert_eq!(r.duplicates, vec!["b".to_string()]);
    assert_eq!(t.row(vocab.get("b").unwrap()), &[2.0; 4]);

    let mut t = original.clone();
    assert!(matches!(
        apply_embeddings("a 1 2 3 4\nb 1 2 3\n", &vocab, &mut t),
        Err(Error::Malformed { line: 2, .. })
    ));
    assert!(matches!(
        apply_embeddings("a 1 x 3 4\n", &vocab, &mut t),
        Err(Error::Malformed { line: 1, .. })
    ));
}

#[test]
fn load_embeddings_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("vec.txt");
    std::fs::write(&path, "c 0.5 0.5 0.5 0.5\n").unwrap();
    let vocab = small_vocab();
    let mut model = Model::new(
        small_config(Architecture::ConAtt),
        LabelScheme::TwoWay,
        vocab.clone(),
        1,
    )
    .unwrap();
    let report = model.load_embeddings(&path).unwrap();
    assert_eq!(report.covered, 1);
    assert!((report.coverage - 1.0 / 7.0).abs() < 1e-15);
    assert_eq!(model.embedding_table().row(vocab.get("c").unwrap()), &[0.5; 4]);
    assert!(model.load_embeddings(dir.path().join("missing.txt")).is_err());
}

#[test]
fn checkpoint_round_trip_and_tamper_detection() {
    let dir = tempfile::tempdir().unwrap();
    for arch in [Architecture::ConAtt, Architecture::CRnn] {
        let mut config = small_config(arch);
        config.dense_bias = true;
        let model = Model::new(config, LabelScheme::ThreeWay, small_vocab(), 21).unwrap();
        let sub = dir.path().join(arch.name());
        let manifest = save_model(&model, &sub).unwrap();
        assert_eq!(manifest.config_hash.len(), 64);
        let back = load_model(&sub).unwrap();
        let input = random_input(&mut ChaCha8Rng::seed_from_u64(2), 9, 5);
        assert_eq!(model.forward(&input).unwrap(), back.forward(&input).unwrap());
        assert_eq!(back.scheme(), LabelScheme::ThreeWay);

        let params = sub.join(PARAMS_FILE);
        let text = std::fs::read_to_string(&params).unwrap();
        std::fs::write(&params, text.replacen("param w_f", "param w_g", 1)).unwrap();
        assert!(load_model(&sub).is_err());
    }
    assert!(load_model(dir.path().join("nothing")).is_err());
}

#[test]
fn embed_representations_covers_every_mention() {
    let split = CorpusSplit::new(SplitName::Train, vec![table1_document()]).unwrap();
    let vocab = Vocabulary::fit(&split).unwrap();
    for arch in [Architecture::ConAtt, Architecture::CRnn] {
        let model = Model::new(small_config(arch), LabelScheme::FourWay, vocab.clone(), 4).unwrap();
        let reps = embed_representations(&model, &split).unwrap();
        assert_eq!(reps.len(), split.mention_count());
        assert!(reps
            .iter()
            .all(|r| r.values.len() == 5 && r.values.iter().all(|&v| v >= 0.0)));
        assert_eq!(reps, embed_representations(&model, &split).unwrap());
    }
}

#[test]
fn from_parts_checks_layout() {
    let model = Model::new(
        small_config(Architecture::ConAtt),
        LabelScheme::TwoWay,
        small_vocab(),
        1,
    )
    .unwrap();
    let mut wrong = small_config(Architecture::ConAtt);
    wrong.hidden = 4;
    assert!(Model::from_parts(wrong, LabelScheme::TwoWay, small_vocab(), model.store().clone(), 1).is_err());
    assert!(Model::from_parts(
        small_config(Architecture::ConAtt),
        LabelScheme::FourWay,
        small_vocab(),
        model.store().clone(),
        1
    )
    .is_err());
    assert!("c-rnn".parse::<Architecture>().is_ok());
    assert!("lstm".parse::<Architecture>().is_err());
}
