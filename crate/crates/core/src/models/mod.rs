//! The two referential-form classifiers.
//!
//! * **ConATT** encodes the pre- and post-context separately with a BiGRU and
//!   self-attention, then `R = ReLU(W_f [c_pre; x_r; c_pos])`.
//! * **c-RNN** runs one BiGRU over `pre ++ [target] ++ pos` and takes the
//!   state at the target position: `R = ReLU(W_f h_i)`.
//!
//! Both predict `softmax(R W_c)`. `R` is the representation probed later.

mod checkpoint;
mod embeddings;
mod input;
mod suite;
mod vocab;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{CorpusSplit, LabelScheme};
use crate::error::{Error, Result};
use crate::numkernel::{dense_relu_var, BiGru, ParamId, ParamStore, SelfAttention, Tape, Tensor2, Var};

pub use checkpoint::{config_hash, load_model, save_model, ModelManifest, MANIFEST_FILE, PARAMS_FILE};
pub use embeddings::{load_pretrained_embeddings, parse_embeddings, CoverageReport};
pub use input::ModelInput;
pub use suite::{gradcheck_suite, toy_model};
pub use vocab::{Vocabulary, PAD, PAD_TOKEN, UNK, UNK_TOKEN};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Architecture {
    #[serde(rename = "conatt")]
    ConAtt,
    #[serde(rename = "crnn")]
    CRnn,
}

impl Architecture {
    pub fn name(self) -> &'static str {
        match self {
            Architecture::ConAtt => "conatt",
            Architecture::CRnn => "crnn",
        }
    }
}

impl std::str::FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "").as_str() {
            "conatt" => Ok(Architecture::ConAtt),
            "crnn" => Ok(Architecture::CRnn),
            _ => Err(Error::Config(format!("unknown architecture {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub architecture: Architecture,
    pub embed_dim: usize,
    pub hidden: usize,
    pub attn_dim: usize,
    pub repr_dim: usize,
    /// Tokens kept on each side of the target.
    pub max_context: usize,
    pub dense_bias: bool,
    pub unk_fallback: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            architecture: Architecture::CRnn,
            embed_dim: 32,
            hidden: 64,
            attn_dim: 64,
            repr_dim: 64,
            max_context: 60,
            dense_bias: false,
            unk_fallback: true,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let dims = [self.embed_dim, self.hidden, self.attn_dim, self.repr_dim];
        if dims.contains(&0) {
            return Err(Error::Config("model dimensions must be positive".into()));
        }
        Ok(())
    }

    fn feature_width(&self) -> usize {
        match self.architecture {
            Architecture::ConAtt => 4 * self.hidden + self.embed_dim,
            Architecture::CRnn => 2 * self.hidden,
        }
    }
}

/// The probing representation `R` of one mention.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Representation {
    pub values: Vec<f64>,
}

/// Predicted probabilities over the classes of a label scheme.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormDistribution {
    pub probs: Vec<f64>,
}

impl FormDistribution {
    /// Index of the largest probability; ties go to the lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p > self.probs[best] {
                best = i;
            }
        }
        best
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Encoder {
    ConAtt {
        pre: BiGru,
        pre_att: SelfAttention,
        pos: BiGru,
        pos_att: SelfAttention,
    },
    CRnn {
        seq: BiGru,
    },
}

/// Batch forward results on a tape.
#[derive(Debug, Clone, Copy)]
pub struct BatchOutput {
    /// `B x repr_dim`
    pub representation: Var,
    /// `B x K`
    pub logits: Var,
}

#[derive(Debug, Clone)]
pub struct Model {
    config: ModelConfig,
    scheme: LabelScheme,
    vocab: Vocabulary,
    store: ParamStore,
    seed: u64,
    embedding: ParamId,
    encoder: Encoder,
    w_f: ParamId,
    b_f: Option<ParamId>,
    w_c: ParamId,
    b_c: Option<ParamId>,
}

impl Model {
    /// Fresh parameters drawn from `seed`.
    pub fn new(config: ModelConfig, scheme: LabelScheme, vocab: Vocabulary, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let (e, h, a) = (config.embed_dim, config.hidden, config.attn_dim);
        store.add_glorot("embedding", vocab.len(), e, &mut rng)?;
        match config.architecture {
            Architecture::ConAtt => {
                BiGru::register(&mut store, "pre.enc", e, h, &mut rng)?;
                SelfAttention::register(&mut store, "pre.att", 2 * h, a, &mut rng)?;
                BiGru::register(&mut store, "pos.enc", e, h, &mut rng)?;
                SelfAttention::register(&mut store, "pos.att", 2 * h, a, &mut rng)?;
            }
            Architecture::CRnn => {
                BiGru::register(&mut store, "seq.enc", e, h, &mut rng)?;
            }
        }
        store.add_glorot("w_f", config.feature_width(), config.repr_dim, &mut rng)?;
        store.add_glorot("w_c", config.repr_dim, scheme.num_classes(), &mut rng)?;
        if config.dense_bias {
            store.add_zeros("b_f", 1, config.repr_dim)?;
            store.add_zeros("b_c", 1, scheme.num_classes())?;
        }
        Self::from_parts(config, scheme, vocab, store, seed)
    }

    /// Binds an existing parameter store, checking every expected shape.
    pub fn from_parts(
        config: ModelConfig,
        scheme: LabelScheme,
        vocab: Vocabulary,
        store: ParamStore,
        seed: u64,
    ) -> Result<Self> {
        config.validate()?;
        let need = |name: &str, shape: (usize, usize)| -> Result<ParamId> {
            let id = store
                .id(name)
                .ok_or_else(|| Error::Invalid(format!("missing parameter {name}")))?;
            if store.value(id).shape() != shape {
                return Err(Error::Shape(format!(
                    "parameter {name} is {:?}, expected {shape:?}",
                    store.value(id).shape()
                )));
            }
            Ok(id)
        };
        let (e, h, r, k) = (config.embed_dim, config.hidden, config.repr_dim, scheme.num_classes());
        let embedding = need("embedding", (vocab.len(), e))?;
        let check_gru = |bi: &BiGru| -> Result<()> {
            for g in [&bi.forward, &bi.backward] {
                if g.input != e || g.hidden != h {
                    return Err(Error::Shape("encoder size does not match config".into()));
                }
            }
            Ok(())
        };
        let encoder = match config.architecture {
            Architecture::ConAtt => {
                let pre = BiGru::lookup(&store, "pre.enc")?;
                let pos = BiGru::lookup(&store, "pos.enc")?;
                check_gru(&pre)?;
                check_gru(&pos)?;
                need("pre.att.w_a", (2 * h, config.attn_dim))?;
                need("pos.att.w_a", (2 * h, config.attn_dim))?;
                Encoder::ConAtt {
                    pre,
                    pre_att: SelfAttention::lookup(&store, "pre.att")?,
                    pos,
                    pos_att: SelfAttention::lookup(&store, "pos.att")?,
                }
            }
            Architecture::CRnn => {
                let seq = BiGru::lookup(&store, "seq.enc")?;
                check_gru(&seq)?;
                Encoder::CRnn { seq }
            }
        };
        let w_f = need("w_f", (config.feature_width(), r))?;
        let w_c = need("w_c", (r, k))?;
        let (b_f, b_c) = if config.dense_bias {
            (Some(need("b_f", (1, r))?), Some(need("b_c", (1, k))?))
        } else {
            (None, None)
        };
        Ok(Model {
            config,
            scheme,
            vocab,
            store,
            seed,
            embedding,
            encoder,
            w_f,
            b_f,
            w_c,
            b_c,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn scheme(&self) -> LabelScheme {
        self.scheme
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub fn embedding_table(&self) -> &Tensor2 {
        self.store.value(self.embedding)
    }

    pub fn embedding_id(&self) -> ParamId {
        self.embedding
    }

    pub fn representation_width(&self) -> usize {
        self.config.repr_dim
    }

    /// Inputs for every mention of `split` under this model's vocabulary.
    pub fn inputs(&self, split: &CorpusSplit) -> Result<Vec<ModelInput>> {
        ModelInput::from_split(split, &self.vocab, self.config.max_context, self.config.unk_fallback)
    }

    fn check_ids(&self, input: &ModelInput) -> Result<()> {
        let n = self.vocab.len();
        let bad = input
            .pre_context
            .iter()
            .chain(&input.pos_context)
            .chain(std::iter::once(&input.target))
            .find(|&&i| i >= n);
        match bad {
            Some(&i) => Err(Error::UnknownToken(i)),
            None => Ok(()),
        }
    }

    /// Right-pads `seqs`, runs `bigru` with step masks and returns the
    /// per-step encodings and the boolean masks.
    fn encode_padded(
        store: &ParamStore,
        tape: &mut Tape,
        emb: Var,
        bigru: &BiGru,
        seqs: &[&[usize]],
    ) -> Result<Option<(Vec<Var>, Vec<Vec<bool>>)>> {
        let t_len = seqs.iter().map(|s| s.len()).max().unwrap_or(0);
        if t_len == 0 {
            return Ok(None);
        }
        let mut xs = Vec::with_capacity(t_len);
        let mut fmask = Vec::with_capacity(t_len);
        let mut bmask = Vec::with_capacity(t_len);
        for t in 0..t_len {
            let ids: Vec<usize> = seqs.iter().map(|s| s.get(t).copied().unwrap_or(PAD)).collect();
            xs.push(tape.gather(emb, &ids)?);
            let real: Vec<bool> = seqs.iter().map(|s| t < s.len()).collect();
            fmask.push(real.iter().map(|&r| if r { 1.0 } else { 0.0 }).collect());
            bmask.push(real);
        }
        let enc = bigru.encode(tape, store, &xs, Some(&fmask))?;
        Ok(Some((enc, bmask)))
    }

    fn pooled_context(
        store: &ParamStore,
        tape: &mut Tape,
        emb: Var,
        bigru: &BiGru,
        att: &SelfAttention,
        seqs: &[&[usize]],
    ) -> Result<Var> {
        match Self::encode_padded(store, tape, emb, bigru, seqs)? {
            Some((enc, mask)) => att.pool(tape, store, &enc, &mask),
            None => Ok(tape.constant(Tensor2::zeros(seqs.len(), bigru.output_width()))),
        }
    }

    /// Forward pass for a batch. Results for each row are independent of the
    /// other rows in the batch.
    pub fn forward_batch(&self, tape: &mut Tape, inputs: &[&ModelInput]) -> Result<BatchOutput> {
        self.forward_batch_with(&self.store, tape, inputs)
    }

    /// [`Model::forward_batch`] with parameter values taken from `store`,
    /// which must have this model's layout (e.g. a clone of [`Model::store`]).
    pub fn forward_batch_with(
        &self,
        store: &ParamStore,
        tape: &mut Tape,
        inputs: &[&ModelInput],
    ) -> Result<BatchOutput> {
        if store.len() != self.store.len() {
            return Err(Error::Invalid("parameter store layout differs from the model".into()));
        }
        if inputs.is_empty() {
            return Err(Error::Invalid("empty batch".into()));
        }
        for input in inputs {
            self.check_ids(input)?;
        }
        let emb = tape.param(store, self.embedding);
        let features = match &self.encoder {
            Encoder::ConAtt {
                pre,
                pre_att,
                pos,
                pos_att,
            } => {
                let pre_seqs: Vec<&[usize]> = inputs.iter().map(|i| i.pre_context.as_slice()).collect();
                let pos_seqs: Vec<&[usize]> = inputs.iter().map(|i| i.pos_context.as_slice()).collect();
                let c_pre = Self::pooled_context(store, tape, emb, pre, pre_att, &pre_seqs)?;
                let targets: Vec<usize> = inputs.iter().map(|i| i.target).collect();
                let x_r = tape.gather(emb, &targets)?;
                let c_pos = Self::pooled_context(store, tape, emb, pos, pos_att, &pos_seqs)?;
                tape.concat(&[c_pre, x_r, c_pos])?
            }
            Encoder::CRnn { seq } => {
                let seqs: Vec<Vec<usize>> = inputs.iter().map(|i| i.concatenated()).collect();
                let refs: Vec<&[usize]> = seqs.iter().map(Vec::as_slice).collect();
                let (enc, _) = Self::encode_padded(store, tape, emb, seq, &refs)?.expect("target is always present");
                let positions: Vec<usize> = inputs.iter().map(|i| i.target_position()).collect();
                tape.pick_rows(&enc, &positions)?
            }
        };
        let representation = dense_relu_var(tape, store, features, self.w_f, self.b_f)?;
        let w_c = tape.param(store, self.w_c);
        let mut logits = tape.matmul(representation, w_c)?;
        if let Some(b) = self.b_c {
            let b = tape.param(store, b);
            logits = tape.add_row(logits, b)?;
        }
        Ok(BatchOutput { representation, logits })
    }

    /// Mean cross-entropy of a batch as a `1 x 1` tape node.
    pub fn loss(&self, tape: &mut Tape, inputs: &[&ModelInput], gold: &[usize]) -> Result<Var> {
        self.loss_with(&self.store, tape, inputs, gold)
    }

    pub fn loss_with(
        &self,
        store: &ParamStore,
        tape: &mut Tape,
        inputs: &[&ModelInput],
        gold: &[usize],
    ) -> Result<Var> {
        let out = self.forward_batch_with(store, tape, inputs)?;
        tape.softmax_xent(out.logits, gold)
    }

    /// Replaces embedding rows with vectors from a pretrained file.
    pub fn load_embeddings(&mut self, path: impl AsRef<std::path::Path>) -> Result<CoverageReport> {
        let mut table = self.store.value(self.embedding).clone();
        let report = load_pretrained_embeddings(path, &self.vocab, &mut table)?;
        self.store.set_value(self.embedding, table)?;
        Ok(report)
    }

    /// Representations and class distributions for a batch of inputs.
    pub fn predict_batch(&self, inputs: &[&ModelInput]) -> Result<Vec<(Representation, FormDistribution)>> {
        let mut tape = Tape::new();
        let out = self.forward_batch(&mut tape, inputs)?;
        let r = tape.value(out.representation);
        let l = tape.value(out.logits);
        Ok((0..inputs.len())
            .map(|b| {
                (
                    Representation {
                        values: r.row(b).to_vec(),
                    },
                    FormDistribution {
                        probs: crate::numkernel::softmax(l.row(b)),
                    },
                )
            })
            .collect())
    }

    pub fn forward(&self, input: &ModelInput) -> Result<(Representation, FormDistribution)> {
        Ok(self.predict_batch(&[input])?.remove(0))
    }

    /// Predictions for many inputs, batched and spread over the rayon pool.
    pub fn predict_all(&self, inputs: &[ModelInput]) -> Result<Vec<(Representation, FormDistribution)>> {
        const CHUNK: usize = 64;
        let parts: Vec<Result<Vec<_>>> = inputs
            .par_chunks(CHUNK)
            .map(|chunk| {
                let refs: Vec<&ModelInput> = chunk.iter().collect();
                self.predict_batch(&refs)
            })
            .collect();
        let mut out = Vec::with_capacity(inputs.len());
        for p in parts {
            out.extend(p?);
        }
        Ok(out)
    }
}

/// `forward` for a ConATT model; errors on any other architecture.
pub fn forward_conatt(model: &Model, input: &ModelInput) -> Result<(Representation, FormDistribution)> {
    if model.config.architecture != Architecture::ConAtt {
        return Err(Error::Config("model is not ConATT".into()));
    }
    model.forward(input)
}

/// `forward` for a c-RNN model; errors on any other architecture.
pub fn forward_crnn(model: &Model, input: &ModelInput) -> Result<(Representation, FormDistribution)> {
    if model.config.architecture != Architecture::CRnn {
        return Err(Error::Config("model is not c-RNN".into()));
    }
    model.forward(input)
}

/// Frozen representations of every mention in `split`, in mention order.
pub fn embed_representations(model: &Model, split: &CorpusSplit) -> Result<Vec<Representation>> {
    let inputs = model.inputs(split)?;
    Ok(model.predict_all(&inputs)?.into_iter().map(|(r, _)| r).collect())
}

#[cfg(test)]
mod tests;
