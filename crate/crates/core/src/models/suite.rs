//! Finite-difference checks of every building block and both full
//! architectures at toy size.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Architecture, Model, ModelConfig, ModelInput, Vocabulary};
use crate::corpus::LabelScheme;
use crate::error::Result;
use crate::numkernel::{
    dense_relu_var, grad_check, BiGru, GradCheckReport, GruLayer, ParamStore, SelfAttention, Tape, Tensor2, Var,
    DEFAULT_STEP,
};
use crate::seed::derive_seed;

fn random_tensor(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor2 {
    let data = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
    Tensor2::new(rows, cols, data).expect("finite")
}

/// Contracts a node to `1 x 1` with fixed weights drawn from `seed`.
fn reduce(tape: &mut Tape, v: Var, seed: u64) -> Result<Var> {
    let (rows, cols) = tape.value(v).shape();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let left = tape.constant(random_tensor(&mut rng, 1, rows));
    let right = tape.constant(random_tensor(&mut rng, cols, 1));
    let t = tape.matmul(left, v)?;
    tape.matmul(t, right)
}

/// Toy model with a 5-entry vocabulary, hidden size 4 and 3 classes.
pub fn toy_model(architecture: Architecture, seed: u64) -> Result<Model> {
    let vocab = Vocabulary::from_tokens(["ENT", "is", "."])?;
    let config = ModelConfig {
        architecture,
        embed_dim: 3,
        hidden: 4,
        attn_dim: 3,
        repr_dim: 5,
        max_context: 6,
        dense_bias: false,
        unk_fallback: true,
    };
    Model::new(config, LabelScheme::ThreeWay, vocab, seed)
}

fn toy_inputs() -> Vec<ModelInput> {
    vec![
        ModelInput {
            pre_context: vec![2, 3, 4],
            target: 2,
            pos_context: vec![3, 2],
        },
        ModelInput {
            pre_context: vec![],
            target: 2,
            pos_context: vec![3, 4, 1, 2, 3],
        },
        ModelInput {
            pre_context: vec![4, 2, 3, 2, 4],
            target: 2,
            pos_context: vec![],
        },
    ]
}

/// Runs all checks, with parameters drawn from `seed`.
pub fn gradcheck_suite(seed: u64, tolerance: f64) -> Result<Vec<GradCheckReport>> {
    let mut reports = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "gradcheck"));

    let mut store = ParamStore::new();
    let gru = GruLayer::register(&mut store, "gru", 3, 4, &mut rng)?;
    randomize(&mut store, &mut rng);
    let x = random_tensor(&mut rng, 2, 3);
    let h = random_tensor(&mut rng, 2, 4);
    reports.push(grad_check(
        "gru_step",
        &mut store,
        |t, s| {
            let (xv, hv) = (t.constant(x.clone()), t.constant(h.clone()));
            let out = gru.step(t, s, xv, hv)?;
            reduce(t, out, 1)
        },
        DEFAULT_STEP,
        tolerance,
    )?);

    let mut store = ParamStore::new();
    let bi = BiGru::register(&mut store, "bigru", 3, 4, &mut rng)?;
    randomize(&mut store, &mut rng);
    let xs: Vec<Tensor2> = (0..4).map(|_| random_tensor(&mut rng, 2, 3)).collect();
    let mask = vec![vec![1.0, 1.0], vec![1.0, 1.0], vec![1.0, 0.0], vec![1.0, 0.0]];
    reports.push(grad_check(
        "bigru_encode",
        &mut store,
        |t, s| {
            let vars: Vec<Var> = xs.iter().map(|x| t.constant(x.clone())).collect();
            let enc = bi.encode(t, s, &vars, Some(&mask))?;
            let all = t.concat(&enc)?;
            reduce(t, all, 2)
        },
        DEFAULT_STEP,
        tolerance,
    )?);

    let mut store = ParamStore::new();
    let steps: Vec<_> = (0..4)
        .map(|i| store.add(format!("h{i}"), random_tensor(&mut rng, 2, 6)))
        .collect::<Result<_>>()?;
    let att = SelfAttention::register(&mut store, "att", 6, 5, &mut rng)?;
    let bmask = vec![
        vec![true, true],
        vec![true, true],
        vec![true, false],
        vec![false, false],
    ];
    reports.push(grad_check(
        "self_attention",
        &mut store,
        |t, s| {
            let hs: Vec<Var> = steps.iter().map(|&p| t.param(s, p)).collect();
            let c = att.pool(t, s, &hs, &bmask)?;
            reduce(t, c, 3)
        },
        DEFAULT_STEP,
        tolerance,
    )?);

    let mut store = ParamStore::new();
    let w = store.add("w_f", random_tensor(&mut rng, 6, 5))?;
    let x = random_tensor(&mut rng, 3, 6);
    reports.push(grad_check(
        "dense_relu",
        &mut store,
        |t, s| {
            let xv = t.constant(x.clone());
            let r = dense_relu_var(t, s, xv, w, None)?;
            reduce(t, r, 4)
        },
        DEFAULT_STEP,
        tolerance,
    )?);

    let mut store = ParamStore::new();
    let logits = store.add("logits", random_tensor(&mut rng, 4, 3))?;
    reports.push(grad_check(
        "softmax_xent",
        &mut store,
        |t, s| {
            let l = t.param(s, logits);
            t.softmax_xent(l, &[0, 2, 1, 2])
        },
        DEFAULT_STEP,
        tolerance,
    )?);

    let inputs = toy_inputs();
    let gold = [0usize, 2, 1];
    for arch in [Architecture::ConAtt, Architecture::CRnn] {
        let model = toy_model(arch, derive_seed(seed, arch.name()))?;
        let mut store = model.store().clone();
        let label = format!("{} (toy)", arch.name());
        let report = grad_check(
            &label,
            &mut store,
            |t, s| {
                let refs: Vec<&ModelInput> = inputs.iter().collect();
                model.loss_with(s, t, &refs, &gold)
            },
            DEFAULT_STEP,
            tolerance,
        );
        reports.push(report?);
    }
    Ok(reports)
}

fn randomize(store: &mut ParamStore, rng: &mut ChaCha8Rng) {
    for id in store.ids().collect::<Vec<_>>() {
        let (r, c) = store.value(id).shape();
        store
            .value_mut(id)
            .data_mut()
            .copy_from_slice(random_tensor(rng, r, c).data());
    }
}
