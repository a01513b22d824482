//! Reverse-mode autodiff over batched row-major tensors.
//!
//! A [`Tape`] records one forward pass. Values are rows-as-examples
//! (`batch x features`); parameters enter through [`Tape::param`] and their
//! gradients are accumulated into the [`ParamStore`] by [`Tape::backward`].

use std::collections::HashMap;

use super::tensor::{concat_cols, mm, mm_nt, mm_tn};
use super::{ParamId, ParamStore, Tensor2};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    Param(ParamId),
    MatMul(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Sigmoid(Var),
    Tanh(Var),
    Relu(Var),
    /// `z * h + (1 - z) * n`
    Interp {
        z: Var,
        h: Var,
        n: Var,
    },
    /// Per-row `m * new + (1 - m) * old` for a constant 0/1 mask.
    Blend {
        new: Var,
        old: Var,
        mask: Vec<f64>,
    },
    Concat(Vec<Var>),
    Gather {
        table: Var,
        ids: Vec<usize>,
    },
    PickRows {
        steps: Vec<Var>,
        pick: Vec<usize>,
    },
    AttnPool {
        steps: Vec<Var>,
        scores: Vec<Var>,
        /// `weights[b * T + t]`, zero where masked.
        weights: Vec<f64>,
    },
    SoftmaxXent {
        logits: Var,
        gold: Vec<usize>,
        probs: Tensor2,
    },
}

#[derive(Debug)]
struct Node {
    value: Tensor2,
    op: Op,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    bound: HashMap<ParamId, Var>,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `-ln softmax(logits)[gold]` via log-sum-exp.
pub(crate) fn nll_row(logits: &[f64], gold: usize) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = logits.iter().map(|&l| (l - max).exp()).sum::<f64>().ln();
    lse - (logits[gold] - max)
}

/// Max-subtracted softmax of one row.
pub(crate) fn softmax_row(logits: &[f64], out: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (o, &l) in out.iter_mut().zip(logits) {
        *o = (l - max).exp();
        total += *o;
    }
    for o in out.iter_mut() {
        *o /= total;
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, value: Tensor2, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor2 {
        &self.nodes[v.0].value
    }

    /// A constant input; receives no gradient.
    pub fn constant(&mut self, value: Tensor2) -> Var {
        self.push(value, Op::Leaf)
    }

    /// Binds a parameter once per tape; repeated calls return the same node.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        if let Some(&v) = self.bound.get(&id) {
            return v;
        }
        let v = self.push(store.value(id).clone(), Op::Param(id));
        self.bound.insert(id, v);
        v
    }

    fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.1 != sb.0 {
            return Err(Error::Shape(format!("matmul {sa:?} x {sb:?}")));
        }
        let value = mm(self.value(a), self.value(b));
        Ok(self.push(value, Op::MatMul(a, b)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::Shape(format!("add {:?} + {:?}", self.shape(a), self.shape(b))));
        }
        let value = self.value(a).zip_map(self.value(b), |x, y| x + y);
        Ok(self.push(value, Op::Add(a, b)))
    }

    /// Adds a `1 x n` row to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let (sa, sr) = (self.shape(a), self.shape(row));
        if sr.0 != 1 || sr.1 != sa.1 {
            return Err(Error::Shape(format!("add_row {sa:?} + {sr:?}")));
        }
        let mut value = self.value(a).clone();
        let r = self.value(row).data().to_vec();
        for i in 0..sa.0 {
            for (x, y) in value.row_mut(i).iter_mut().zip(&r) {
                *x += y;
            }
        }
        Ok(self.push(value, Op::AddRow(a, row)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::Shape(format!("mul {:?} * {:?}", self.shape(a), self.shape(b))));
        }
        let value = self.value(a).zip_map(self.value(b), |x, y| x * y);
        Ok(self.push(value, Op::Mul(a, b)))
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Var {
        let value = self.value(a).map(|x| x * k);
        self.push(value, Op::Scale(a, k))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let value = self.value(a).map(sigmoid);
        self.push(value, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let value = self.value(a).map(f64::tanh);
        self.push(value, Op::Tanh(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|x| x.max(0.0));
        self.push(value, Op::Relu(a))
    }

    pub fn interp(&mut self, z: Var, h: Var, n: Var) -> Result<Var> {
        let s = self.shape(z);
        if self.shape(h) != s || self.shape(n) != s {
            return Err(Error::Shape("interp operands differ in shape".into()));
        }
        let (zv, hv, nv) = (self.value(z), self.value(h), self.value(n));
        let data = zv
            .data()
            .iter()
            .zip(hv.data())
            .zip(nv.data())
            .map(|((&z, &h), &n)| z * h + (1.0 - z) * n)
            .collect();
        Ok(self.push(Tensor2::from_raw(s.0, s.1, data), Op::Interp { z, h, n }))
    }

    /// Row `i` is taken from `new` where `mask[i] == 1` and from `old` where 0.
    pub fn blend(&mut self, new: Var, old: Var, mask: &[f64]) -> Result<Var> {
        let s = self.shape(new);
        if self.shape(old) != s || mask.len() != s.0 {
            return Err(Error::Shape("blend operands differ in shape".into()));
        }
        let mut value = self.value(old).clone();
        for (i, &m) in mask.iter().enumerate() {
            if m != 0.0 {
                value.row_mut(i).copy_from_slice(self.value(new).row(i));
            }
        }
        Ok(self.push(
            value,
            Op::Blend {
                new,
                old,
                mask: mask.to_vec(),
            },
        ))
    }

    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let rows = self.shape(parts[0]).0;
        if parts.iter().any(|&p| self.shape(p).0 != rows) {
            return Err(Error::Shape("concat with unequal row counts".into()));
        }
        let values: Vec<&Tensor2> = parts.iter().map(|&p| self.value(p)).collect();
        let value = concat_cols(&values);
        Ok(self.push(value, Op::Concat(parts.to_vec())))
    }

    /// Embedding lookup: row `i` of the output is row `ids[i]` of `table`.
    pub fn gather(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        let (n, d) = self.shape(table);
        if let Some(&bad) = ids.iter().find(|&&i| i >= n) {
            return Err(Error::IndexOutOfRange { index: bad, len: n });
        }
        let t = self.value(table);
        let mut data = Vec::with_capacity(ids.len() * d);
        for &i in ids {
            data.extend_from_slice(t.row(i));
        }
        let value = Tensor2::from_raw(ids.len(), d, data);
        Ok(self.push(
            value,
            Op::Gather {
                table,
                ids: ids.to_vec(),
            },
        ))
    }

    /// Row `b` of the output is row `b` of `steps[pick[b]]`.
    pub fn pick_rows(&mut self, steps: &[Var], pick: &[usize]) -> Result<Var> {
        let (rows, cols) = self.shape(steps[0]);
        if pick.len() != rows {
            return Err(Error::Shape("pick_rows needs one index per row".into()));
        }
        let mut value = Tensor2::zeros(rows, cols);
        for (b, &t) in pick.iter().enumerate() {
            let step = steps.get(t).ok_or(Error::IndexOutOfRange {
                index: t,
                len: steps.len(),
            })?;
            value.row_mut(b).copy_from_slice(self.value(*step).row(b));
        }
        Ok(self.push(
            value,
            Op::PickRows {
                steps: steps.to_vec(),
                pick: pick.to_vec(),
            },
        ))
    }

    /// Attention pooling: per row, softmax over the unmasked step scores and
    /// the weighted sum of step vectors. Rows with no unmasked step pool to 0.
    /// `mask[t][b]` marks step `t` of row `b` as real.
    pub fn attn_pool(&mut self, steps: &[Var], scores: &[Var], mask: &[Vec<bool>]) -> Result<Var> {
        let t_len = steps.len();
        if t_len == 0 || scores.len() != t_len || mask.len() != t_len {
            return Err(Error::Shape("attn_pool needs matching non-empty steps".into()));
        }
        let (rows, cols) = self.shape(steps[0]);
        for t in 0..t_len {
            if self.shape(steps[t]) != (rows, cols) || self.shape(scores[t]) != (rows, 1) || mask[t].len() != rows {
                return Err(Error::Shape(format!("attn_pool step {t} has the wrong shape")));
            }
        }
        let mut weights = vec![0.0; rows * t_len];
        let mut value = Tensor2::zeros(rows, cols);
        let mut buf_s = Vec::with_capacity(t_len);
        let mut buf_w = Vec::with_capacity(t_len);
        for b in 0..rows {
            buf_s.clear();
            let valid: Vec<usize> = (0..t_len).filter(|&t| mask[t][b]).collect();
            if valid.is_empty() {
                continue;
            }
            for &t in &valid {
                buf_s.push(self.value(scores[t]).get(b, 0));
            }
            buf_w.resize(valid.len(), 0.0);
            softmax_row(&buf_s, &mut buf_w);
            for (&t, &w) in valid.iter().zip(&buf_w) {
                weights[b * t_len + t] = w;
                let src = self.nodes[steps[t].0].value.row(b).to_vec();
                for (o, s) in value.row_mut(b).iter_mut().zip(src) {
                    *o += w * s;
                }
            }
        }
        Ok(self.push(
            value,
            Op::AttnPool {
                steps: steps.to_vec(),
                scores: scores.to_vec(),
                weights,
            },
        ))
    }

    /// Attention weights recorded by an `attn_pool` node, row-major `B x T`.
    pub fn attention_weights(&self, v: Var) -> Option<&[f64]> {
        match &self.nodes[v.0].op {
            Op::AttnPool { weights, .. } => Some(weights),
            _ => None,
        }
    }

    /// Mean cross-entropy of row-wise softmax against `gold`, as a `1 x 1` node.
    pub fn softmax_xent(&mut self, logits: Var, gold: &[usize]) -> Result<Var> {
        let (rows, k) = self.shape(logits);
        if gold.len() != rows {
            return Err(Error::Shape("one gold label per row required".into()));
        }
        if k < 2 {
            return Err(Error::Shape("softmax needs at least two classes".into()));
        }
        if let Some(&g) = gold.iter().find(|&&g| g >= k) {
            return Err(Error::IndexOutOfRange { index: g, len: k });
        }
        let l = self.value(logits);
        let mut probs = Tensor2::zeros(rows, k);
        let mut loss = 0.0;
        for b in 0..rows {
            softmax_row(l.row(b), probs.row_mut(b));
            loss += nll_row(l.row(b), gold[b]);
        }
        loss /= rows as f64;
        Ok(self.push(
            Tensor2::from_raw(1, 1, vec![loss]),
            Op::SoftmaxXent {
                logits,
                gold: gold.to_vec(),
                probs,
            },
        ))
    }

    pub fn probabilities(&self, v: Var) -> Option<&Tensor2> {
        match &self.nodes[v.0].op {
            Op::SoftmaxXent { probs, .. } => Some(probs),
            _ => None,
        }
    }

    /// Propagates d(loss)/d(node) back through the tape and adds the parameter
    /// gradients into `store`. `loss` must be a `1 x 1` node of this tape.
    pub fn backward(&self, loss: Var, store: &mut ParamStore) -> Result<()> {
        if loss.0 >= self.nodes.len() {
            return Err(Error::Invalid("backward called before forward".into()));
        }
        if self.shape(loss) != (1, 1) {
            return Err(Error::Shape("backward needs a scalar loss".into()));
        }
        let mut grads: Vec<Option<Tensor2>> = (0..=loss.0).map(|_| None).collect();
        grads[loss.0] = Some(Tensor2::from_raw(1, 1, vec![1.0]));

        fn acc(grads: &mut [Option<Tensor2>], v: Var, g: Tensor2) {
            match &mut grads[v.0] {
                Some(existing) => existing.add_assign(&g),
                slot @ None => *slot = Some(g),
            }
        }

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Leaf => {}
                Op::Param(id) => store.accumulate_grad(*id, &g),
                Op::MatMul(a, b) => {
                    let ga = mm_nt(&g, self.value(*b));
                    let gb = mm_tn(self.value(*a), &g);
                    acc(&mut grads, *a, ga);
                    acc(&mut grads, *b, gb);
                }
                Op::Add(a, b) => {
                    acc(&mut grads, *a, g.clone());
                    acc(&mut grads, *b, g);
                }
                Op::AddRow(a, row) => {
                    let mut gr = Tensor2::zeros(1, g.cols());
                    for r in 0..g.rows() {
                        for (o, x) in gr.data_mut().iter_mut().zip(g.row(r)) {
                            *o += x;
                        }
                    }
                    acc(&mut grads, *row, gr);
                    acc(&mut grads, *a, g);
                }
                Op::Mul(a, b) => {
                    let ga = g.zip_map(self.value(*b), |x, y| x * y);
                    let gb = g.zip_map(self.value(*a), |x, y| x * y);
                    acc(&mut grads, *a, ga);
                    acc(&mut grads, *b, gb);
                }
                Op::Scale(a, k) => acc(&mut grads, *a, g.map(|x| x * k)),
                Op::Sigmoid(a) => {
                    let ga = g.zip_map(&node.value, |x, s| x * s * (1.0 - s));
                    acc(&mut grads, *a, ga);
                }
                Op::Tanh(a) => {
                    let ga = g.zip_map(&node.value, |x, t| x * (1.0 - t * t));
                    acc(&mut grads, *a, ga);
                }
                Op::Relu(a) => {
                    let ga = g.zip_map(self.value(*a), |x, input| if input > 0.0 { x } else { 0.0 });
                    acc(&mut grads, *a, ga);
                }
                Op::Interp { z, h, n } => {
                    let (zv, hv, nv) = (self.value(*z), self.value(*h), self.value(*n));
                    let (rows, cols) = g.shape();
                    let mut gz = Vec::with_capacity(rows * cols);
                    let mut gh = Vec::with_capacity(rows * cols);
                    let mut gn = Vec::with_capacity(rows * cols);
                    for j in 0..rows * cols {
                        let (gj, zj) = (g.data()[j], zv.data()[j]);
                        gz.push(gj * (hv.data()[j] - nv.data()[j]));
                        gh.push(gj * zj);
                        gn.push(gj * (1.0 - zj));
                    }
                    acc(&mut grads, *z, Tensor2::from_raw(rows, cols, gz));
                    acc(&mut grads, *h, Tensor2::from_raw(rows, cols, gh));
                    acc(&mut grads, *n, Tensor2::from_raw(rows, cols, gn));
                }
                Op::Blend { new, old, mask } => {
                    let mut g_new = g.clone();
                    let mut g_old = g;
                    for (r, &m) in mask.iter().enumerate() {
                        if m != 0.0 {
                            g_old.row_mut(r).fill(0.0);
                        } else {
                            g_new.row_mut(r).fill(0.0);
                        }
                    }
                    acc(&mut grads, *new, g_new);
                    acc(&mut grads, *old, g_old);
                }
                Op::Concat(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let (rows, cols) = self.shape(p);
                        let mut gp = Tensor2::zeros(rows, cols);
                        for r in 0..rows {
                            gp.row_mut(r).copy_from_slice(&g.row(r)[offset..offset + cols]);
                        }
                        offset += cols;
                        acc(&mut grads, p, gp);
                    }
                }
                Op::Gather { table, ids } => {
                    let (n, d) = self.shape(*table);
                    let mut gt = Tensor2::zeros(n, d);
                    for (r, &id) in ids.iter().enumerate() {
                        for (o, x) in gt.row_mut(id).iter_mut().zip(g.row(r)) {
                            *o += x;
                        }
                    }
                    acc(&mut grads, *table, gt);
                }
                Op::PickRows { steps, pick } => {
                    let (rows, cols) = g.shape();
                    let mut per_step: HashMap<usize, Tensor2> = HashMap::new();
                    for (b, &t) in pick.iter().enumerate() {
                        per_step
                            .entry(t)
                            .or_insert_with(|| Tensor2::zeros(rows, cols))
                            .row_mut(b)
                            .copy_from_slice(g.row(b));
                    }
                    let mut keys: Vec<usize> = per_step.keys().copied().collect();
                    keys.sort_unstable();
                    for t in keys {
                        acc(&mut grads, steps[t], per_step.remove(&t).expect("key present"));
                    }
                }
                Op::AttnPool { steps, scores, weights } => {
                    let t_len = steps.len();
                    let (rows, cols) = g.shape();
                    // d(alpha_t) = g . h_t, d(e_t) = alpha_t (d(alpha_t) - sum_s alpha_s d(alpha_s))
                    let mut d_alpha = vec![0.0; rows * t_len];
                    for t in 0..t_len {
                        let h = self.value(steps[t]);
                        for b in 0..rows {
                            if weights[b * t_len + t] != 0.0 {
                                d_alpha[b * t_len + t] = g.row(b).iter().zip(h.row(b)).map(|(x, y)| x * y).sum();
                            }
                        }
                    }
                    let mean: Vec<f64> = (0..rows)
                        .map(|b| {
                            (0..t_len)
                                .map(|t| weights[b * t_len + t] * d_alpha[b * t_len + t])
                                .sum()
                        })
                        .collect();
                    for t in 0..t_len {
                        let mut gh = Tensor2::zeros(rows, cols);
                        let mut ge = Tensor2::zeros(rows, 1);
                        for b in 0..rows {
                            let w = weights[b * t_len + t];
                            if w == 0.0 {
                                continue;
                            }
                            for (o, x) in gh.row_mut(b).iter_mut().zip(g.row(b)) {
                                *o = w * x;
                            }
                            ge.set(b, 0, w * (d_alpha[b * t_len + t] - mean[b]));
                        }
                        acc(&mut grads, steps[t], gh);
                        acc(&mut grads, scores[t], ge);
                    }
                }
                Op::SoftmaxXent { logits, gold, probs } => {
                    let scale = g.get(0, 0) / gold.len() as f64;
                    let mut gl = probs.clone();
                    for (b, &y) in gold.iter().enumerate() {
                        let row = gl.row_mut(b);
                        row[y] -= 1.0;
                        for x in row.iter_mut() {
                            *x *= scale;
                        }
                    }
                    acc(&mut grads, *logits, gl);
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_tape(x: f64) -> (Tape, ParamStore, Var, ParamId) {
        let mut store = ParamStore::new();
        let id = store.add("x", Tensor2::new(1, 1, vec![x]).unwrap()).unwrap();
        let mut tape = Tape::new();
        let v = tape.param(&store, id);
        (tape, store, v, id)
    }

    #[test]
    fn backward_on_empty_tape_fails() {
        let tape = Tape::new();
        let mut store = ParamStore::new();
        assert!(tape.backward(Var(0), &mut store).is_err());
    }

    #[test]
    fn sigmoid_tanh_derivatives() {
        let (mut tape, mut store, x, id) = scalar_tape(0.3);
        let s = tape.sigmoid(x);
        let t = tape.tanh(s);
        tape.backward(t, &mut store).unwrap();
        let sv = 1.0 / (1.0 + (-0.3f64).exp());
        let expected = (1.0 - sv.tanh().powi(2)) * sv * (1.0 - sv);
        assert!((store.grad(id).get(0, 0) - expected).abs() < 1e-15);
    }

    #[test]
    fn relu_subgradient_at_zero_is_zero() {
        let (mut tape, mut store, x, id) = scalar_tape(0.0);
        let r = tape.relu(x);
        tape.backward(r, &mut store).unwrap();
        assert_eq!(store.grad(id).get(0, 0), 0.0);
    }

    #[test]
    fn param_binding_is_shared() {
        let (mut tape, store, x, id) = scalar_tape(2.0);
        assert_eq!(tape.param(&store, id), x);
        assert_eq!(tape.len(), 1);
    }
}
