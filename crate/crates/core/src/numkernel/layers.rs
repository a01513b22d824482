//! GRU, bidirectional GRU, additive self-attention and bias-free dense layers
//! on top of the tape, plus single-example forward helpers.
//!
//! GRU step (row convention, `x: B x in`, `h: B x H`):
//!
//! ```text
//! r  = sigmoid(x W_r + h U_r + b_r)
//! z  = sigmoid(x W_z + h U_z + b_z)
//! n  = tanh(x W_n + (r * h) U_n + b_n)
//! h' = z * h + (1 - z) * n
//! ```
//!
//! Attention over steps `h_1..h_N`: `e_j = tanh(h_j W_a) v_a`,
//! `alpha = softmax(e)`, `c = sum_j alpha_j h_j`.

use rand::Rng;

use super::tape::{nll_row, softmax_row, Tape, Var};
use super::{ParamId, ParamStore, Tensor2};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GruLayer {
    pub input: usize,
    pub hidden: usize,
    w_r: ParamId,
    u_r: ParamId,
    b_r: ParamId,
    w_z: ParamId,
    u_z: ParamId,
    b_z: ParamId,
    w_n: ParamId,
    u_n: ParamId,
    b_n: ParamId,
}

impl GruLayer {
    pub fn register<R: Rng>(
        store: &mut ParamStore,
        prefix: &str,
        input: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let w = |g: &str, s: &mut ParamStore, r: &mut R| s.add_glorot(format!("{prefix}.w_{g}"), input, hidden, r);
        let w_r = w("r", store, rng)?;
        let w_z = w("z", store, rng)?;
        let w_n = w("n", store, rng)?;
        let u = |g: &str, s: &mut ParamStore, r: &mut R| s.add_glorot(format!("{prefix}.u_{g}"), hidden, hidden, r);
        let u_r = u("r", store, rng)?;
        let u_z = u("z", store, rng)?;
        let u_n = u("n", store, rng)?;
        let b_r = store.add_zeros(format!("{prefix}.b_r"), 1, hidden)?;
        let b_z = store.add_zeros(format!("{prefix}.b_z"), 1, hidden)?;
        let b_n = store.add_zeros(format!("{prefix}.b_n"), 1, hidden)?;
        Ok(GruLayer {
            input,
            hidden,
            w_r,
            u_r,
            b_r,
            w_z,
            u_z,
            b_z,
            w_n,
            u_n,
            b_n,
        })
    }

    /// Re-binds a layer to parameters already present in `store` by name.
    pub fn lookup(store: &ParamStore, prefix: &str) -> Result<Self> {
        let id = |n: &str| {
            store
                .id(&format!("{prefix}.{n}"))
                .ok_or_else(|| Error::Invalid(format!("missing parameter {prefix}.{n}")))
        };
        let w_r = id("w_r")?;
        let (input, hidden) = store.value(w_r).shape();
        Ok(GruLayer {
            input,
            hidden,
            w_r,
            u_r: id("u_r")?,
            b_r: id("b_r")?,
            w_z: id("w_z")?,
            u_z: id("u_z")?,
            b_z: id("b_z")?,
            w_n: id("w_n")?,
            u_n: id("u_n")?,
            b_n: id("b_n")?,
        })
    }

    fn gate(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        x: Var,
        h: Var,
        (w, u, b): (ParamId, ParamId, ParamId),
    ) -> Result<Var> {
        let w = tape.param(store, w);
        let u = tape.param(store, u);
        let b = tape.param(store, b);
        let xw = tape.matmul(x, w)?;
        let hu = tape.matmul(h, u)?;
        let s = tape.add(xw, hu)?;
        tape.add_row(s, b)
    }

    pub fn step(&self, tape: &mut Tape, store: &ParamStore, x: Var, h: Var) -> Result<Var> {
        let r_pre = self.gate(tape, store, x, h, (self.w_r, self.u_r, self.b_r))?;
        let r = tape.sigmoid(r_pre);
        let z_pre = self.gate(tape, store, x, h, (self.w_z, self.u_z, self.b_z))?;
        let z = tape.sigmoid(z_pre);
        let rh = tape.mul(r, h)?;
        let n_pre = self.gate(tape, store, x, rh, (self.w_n, self.u_n, self.b_n))?;
        let n = tape.tanh(n_pre);
        tape.interp(z, h, n)
    }

    /// Runs over `xs` (each `B x input`), left to right or reversed. Where
    /// `mask[t][b]` is 0 the state of row `b` is carried unchanged, so right
    /// padding never affects real steps in either direction. Returns the
    /// state after each step in input order.
    pub fn run(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        xs: &[Var],
        mask: Option<&[Vec<f64>]>,
        reverse: bool,
    ) -> Result<Vec<Var>> {
        let Some(&first) = xs.first() else {
            return Err(Error::Invalid("GRU over an empty sequence".into()));
        };
        let batch = tape.value(first).rows();
        let mut h = tape.constant(Tensor2::zeros(batch, self.hidden));
        let mut out = vec![h; xs.len()];
        let order: Vec<usize> = if reverse {
            (0..xs.len()).rev().collect()
        } else {
            (0..xs.len()).collect()
        };
        for t in order {
            let next = self.step(tape, store, xs[t], h)?;
            h = match mask {
                Some(m) if m[t].contains(&0.0) => tape.blend(next, h, &m[t])?,
                _ => next,
            };
            out[t] = h;
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BiGru {
    pub forward: GruLayer,
    pub backward: GruLayer,
}

impl BiGru {
    pub fn register<R: Rng>(
        store: &mut ParamStore,
        prefix: &str,
        input: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Result<Self> {
        Ok(BiGru {
            forward: GruLayer::register(store, &format!("{prefix}.fwd"), input, hidden, rng)?,
            backward: GruLayer::register(store, &format!("{prefix}.bwd"), input, hidden, rng)?,
        })
    }

    pub fn lookup(store: &ParamStore, prefix: &str) -> Result<Self> {
        Ok(BiGru {
            forward: GruLayer::lookup(store, &format!("{prefix}.fwd"))?,
            backward: GruLayer::lookup(store, &format!("{prefix}.bwd"))?,
        })
    }

    pub fn output_width(&self) -> usize {
        self.forward.hidden + self.backward.hidden
    }

    /// Per-step `[forward_t, backward_t]`, each `B x 2H`.
    pub fn encode(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        xs: &[Var],
        mask: Option<&[Vec<f64>]>,
    ) -> Result<Vec<Var>> {
        let f = self.forward.run(tape, store, xs, mask, false)?;
        let b = self.backward.run(tape, store, xs, mask, true)?;
        f.into_iter().zip(b).map(|(f, b)| tape.concat(&[f, b])).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SelfAttention {
    w_a: ParamId,
    v_a: ParamId,
}

impl SelfAttention {
    pub fn register<R: Rng>(
        store: &mut ParamStore,
        prefix: &str,
        input: usize,
        attn: usize,
        rng: &mut R,
    ) -> Result<Self> {
        Ok(SelfAttention {
            w_a: store.add_glorot(format!("{prefix}.w_a"), input, attn, rng)?,
            v_a: store.add_glorot(format!("{prefix}.v_a"), attn, 1, rng)?,
        })
    }

    pub fn lookup(store: &ParamStore, prefix: &str) -> Result<Self> {
        let id = |n: &str| {
            store
                .id(&format!("{prefix}.{n}"))
                .ok_or_else(|| Error::Invalid(format!("missing parameter {prefix}.{n}")))
        };
        Ok(SelfAttention {
            w_a: id("w_a")?,
            v_a: id("v_a")?,
        })
    }

    pub fn scores(&self, tape: &mut Tape, store: &ParamStore, steps: &[Var]) -> Result<Vec<Var>> {
        let w = tape.param(store, self.w_a);
        let v = tape.param(store, self.v_a);
        steps
            .iter()
            .map(|&h| {
                let hw = tape.matmul(h, w)?;
                let u = tape.tanh(hw);
                tape.matmul(u, v)
            })
            .collect()
    }

    pub fn pool(&self, tape: &mut Tape, store: &ParamStore, steps: &[Var], mask: &[Vec<bool>]) -> Result<Var> {
        let scores = self.scores(tape, store, steps)?;
        tape.attn_pool(steps, &scores, mask)
    }
}

/// `ReLU(x W)`, or `ReLU(x W + b)` when a bias parameter is given.
pub fn dense_relu_var(tape: &mut Tape, store: &ParamStore, x: Var, w: ParamId, bias: Option<ParamId>) -> Result<Var> {
    let w = tape.param(store, w);
    let mut y = tape.matmul(x, w)?;
    if let Some(b) = bias {
        let b = tape.param(store, b);
        y = tape.add_row(y, b)?;
    }
    Ok(tape.relu(y))
}

/// Hidden state of a single-sequence GRU.
#[derive(Debug, Clone, PartialEq)]
pub struct GruState {
    pub hidden: Tensor2,
}

impl GruState {
    pub fn zeros(hidden: usize) -> Self {
        GruState {
            hidden: Tensor2::zeros(1, hidden),
        }
    }
}

/// One GRU step for a single example (`x: 1 x input`).
pub fn gru_step(store: &ParamStore, layer: &GruLayer, x: &Tensor2, h_prev: &GruState) -> Result<GruState> {
    if x.shape() != (1, layer.input) || h_prev.hidden.shape() != (1, layer.hidden) {
        return Err(Error::Shape(format!(
            "gru_step expects x 1x{} and h 1x{}, got {:?} and {:?}",
            layer.input,
            layer.hidden,
            x.shape(),
            h_prev.hidden.shape()
        )));
    }
    let mut tape = Tape::new();
    let xv = tape.constant(x.clone());
    let hv = tape.constant(h_prev.hidden.clone());
    let out = layer.step(&mut tape, store, xv, hv)?;
    Ok(GruState {
        hidden: tape.value(out).clone(),
    })
}

/// Bidirectional encoding of a single sequence of `1 x input` rows.
pub fn bigru_encode(store: &ParamStore, bigru: &BiGru, inputs: &[Tensor2]) -> Result<Vec<Tensor2>> {
    if inputs.is_empty() {
        return Err(Error::Invalid("bigru_encode over an empty sequence".into()));
    }
    let mut tape = Tape::new();
    let xs: Vec<Var> = inputs.iter().map(|x| tape.constant(x.clone())).collect();
    let out = bigru.encode(&mut tape, store, &xs, None)?;
    Ok(out.iter().map(|&v| tape.value(v).clone()).collect())
}

/// Attention context over a single sequence; returns `(c, alpha)`.
pub fn self_attention(store: &ParamStore, attn: &SelfAttention, h: &[Tensor2]) -> Result<(Tensor2, Vec<f64>)> {
    if h.is_empty() {
        return Err(Error::Invalid("self_attention over an empty sequence".into()));
    }
    let mut tape = Tape::new();
    let steps: Vec<Var> = h.iter().map(|x| tape.constant(x.clone())).collect();
    let mask = vec![vec![true; 1]; h.len()];
    let c = attn.pool(&mut tape, store, &steps, &mask)?;
    let alpha = tape.attention_weights(c).expect("attn_pool node").to_vec();
    Ok((tape.value(c).clone(), alpha))
}

/// `ReLU(x W)` for explicit tensors.
pub fn dense_relu(w: &Tensor2, x: &Tensor2) -> Result<Tensor2> {
    Ok(x.matmul(w)?.map(|v| v.max(0.0)))
}

/// Row softmax of `1 x K` logits and `-ln p[gold]`.
pub fn softmax_xent(logits: &Tensor2, gold: usize) -> Result<(Vec<f64>, f64)> {
    let k = logits.cols();
    if logits.rows() != 1 || k < 2 {
        return Err(Error::Shape("softmax_xent expects 1 x K logits with K >= 2".into()));
    }
    if gold >= k {
        return Err(Error::IndexOutOfRange { index: gold, len: k });
    }
    let mut p = vec![0.0; k];
    softmax_row(logits.row(0), &mut p);
    let loss = nll_row(logits.row(0), gold);
    Ok((p, loss))
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let mut p = vec![0.0; logits.len()];
    softmax_row(logits, &mut p);
    p
}
