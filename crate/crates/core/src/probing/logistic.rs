//! Multinomial logistic regression trained by full-batch gradient descent.
//!
//! Objective: mean cross-entropy plus `(l2 / 2) * ||W||^2` (biases are not
//! penalised). Each step starts from a Barzilai-Borwein step size and
//! backtracks until the Armijo condition holds, so the objective never rises.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeInit {
    Zero,
    /// Uniform in `[-scale, scale]`.
    Small {
        scale: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProbeConfig {
    pub l2: f64,
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    pub init: ProbeInit,
    /// Z-score each input column with training-set statistics.
    pub standardize: bool,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            l2: 1e-4,
            max_iterations: 500,
            gradient_tolerance: 1e-6,
            init: ProbeInit::Small { scale: 0.01 },
            standardize: false,
        }
    }
}

impl ProbeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.l2 >= 0.0) || !self.l2.is_finite() {
            return Err(Error::Config("probe l2 must be finite and non-negative".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::Config("probe needs at least one iteration".into()));
        }
        if let ProbeInit::Small { scale } = self.init {
            if !(scale >= 0.0) || !scale.is_finite() {
                return Err(Error::Config("probe init scale must be finite and non-negative".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeTrace {
    /// Objective before the first step and after every accepted step.
    pub objective: Vec<f64>,
    pub iterations: usize,
    pub final_gradient_norm: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticProbe {
    classes: usize,
    width: usize,
    /// Row-major `classes x width`.
    weights: Vec<f64>,
    bias: Vec<f64>,
    /// Column mean and scale applied before the linear map.
    standardizer: Option<(Vec<f64>, Vec<f64>)>,
}

impl LogisticProbe {
    pub fn zeros(classes: usize, width: usize) -> Self {
        LogisticProbe {
            classes,
            width,
            weights: vec![0.0; classes * width],
            bias: vec![0.0; classes],
            standardizer: None,
        }
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    fn transform<'a>(&self, x: &'a [f64], buf: &'a mut Vec<f64>) -> &'a [f64] {
        match &self.standardizer {
            None => x,
            Some((mean, scale)) => {
                buf.clear();
                buf.extend(x.iter().zip(mean).zip(scale).map(|((v, m), s)| (v - m) / s));
                buf
            }
        }
    }

    pub fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.width {
            return Err(Error::Shape(format!(
                "probe expects width {}, got {}",
                self.width,
                x.len()
            )));
        }
        let mut buf = Vec::new();
        let x = self.transform(x, &mut buf);
        let mut p = vec![0.0; self.classes];
        scores(&self.weights, &self.bias, self.width, x, &mut p);
        softmax_in_place(&mut p);
        Ok(p)
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        let p = self.predict_proba(x)?;
        let mut best = 0;
        for (k, &v) in p.iter().enumerate() {
            if v > p[best] {
                best = k;
            }
        }
        Ok(best)
    }

    pub fn predict_all(&self, xs: &[Vec<f64>]) -> Result<Vec<usize>> {
        xs.iter().map(|x| self.predict(x)).collect()
    }
}

fn scores(w: &[f64], b: &[f64], d: usize, x: &[f64], out: &mut [f64]) {
    for (k, o) in out.iter_mut().enumerate() {
        let row = &w[k * d..(k + 1) * d];
        *o = b[k] + row.iter().zip(x).map(|(a, c)| a * c).sum::<f64>();
    }
}

fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in z.iter_mut() {
        *v /= sum;
    }
}

pub(super) struct Problem<'a> {
    pub(super) xs: &'a [Vec<f64>],
    pub(super) ys: &'a [usize],
    pub(super) k: usize,
    pub(super) d: usize,
    pub(super) l2: f64,
}

impl Problem<'_> {
    /// Parameters are laid out as `[W (k*d) | b (k)]`.
    pub(super) fn objective(&self, theta: &[f64], grad: Option<&mut [f64]>) -> f64 {
        let (w, b) = theta.split_at(self.k * self.d);
        let n = self.xs.len() as f64;
        let mut p = vec![0.0; self.k];
        let mut loss = 0.0;
        let mut g = grad;
        if let Some(g) = g.as_deref_mut() {
            g.iter_mut().for_each(|v| *v = 0.0);
        }
        for (x, &y) in self.xs.iter().zip(self.ys) {
            scores(w, b, self.d, x, &mut p);
            let max = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + p.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            loss += lse - p[y];
            if let Some(g) = g.as_deref_mut() {
                for k in 0..self.k {
                    let r = (p[k] - lse).exp() - if k == y { 1.0 } else { 0.0 };
                    let row = &mut g[k * self.d..(k + 1) * self.d];
                    for (gj, xj) in row.iter_mut().zip(x) {
                        *gj += r * xj;
                    }
                    g[self.k * self.d + k] += r;
                }
            }
        }
        let sq: f64 = w.iter().map(|v| v * v).sum();
        if let Some(g) = g {
            let nw = self.k * self.d;
            for (gi, wi) in g[..nw].iter_mut().zip(w) {
                *gi = *gi / n + self.l2 * wi;
            }
            for gi in &mut g[nw..] {
                *gi /= n;
            }
        }
        loss / n + 0.5 * self.l2 * sq
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Trains a probe on `xs` (one representation per row) for labels in
/// `0..classes`.
pub fn train_probe(
    xs: &[Vec<f64>],
    labels: &[usize],
    classes: usize,
    config: &ProbeConfig,
    seed: u64,
) -> Result<(LogisticProbe, ProbeTrace)> {
    config.validate()?;
    if xs.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} representations for {} labels",
            xs.len(),
            labels.len()
        )));
    }
    if xs.is_empty() {
        return Err(Error::EmptySplit);
    }
    let d = xs[0].len();
    if let Some(bad) = xs.iter().find(|x| x.len() != d) {
        return Err(Error::Shape(format!(
            "representation width {} differs from {d}",
            bad.len()
        )));
    }
    if let Some(&y) = labels.iter().find(|&&y| y >= classes) {
        return Err(Error::IndexOutOfRange { index: y, len: classes });
    }
    if labels.iter().all(|&y| y == labels[0]) {
        return Err(Error::Invalid("probe training labels contain a single class".into()));
    }

    let mut probe = LogisticProbe::zeros(classes, d);
    let standardized: Vec<Vec<f64>>;
    let data: &[Vec<f64>] = if config.standardize {
        let n = xs.len() as f64;
        let mean: Vec<f64> = (0..d).map(|j| xs.iter().map(|x| x[j]).sum::<f64>() / n).collect();
        let scale: Vec<f64> = (0..d)
            .map(|j| {
                let var = xs.iter().map(|x| (x[j] - mean[j]).powi(2)).sum::<f64>() / n;
                if var > 0.0 {
                    var.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        standardized = xs
            .iter()
            .map(|x| x.iter().zip(&mean).zip(&scale).map(|((v, m), s)| (v - m) / s).collect())
            .collect();
        probe.standardizer = Some((mean, scale));
        &standardized
    } else {
        xs
    };

    let problem = Problem {
        xs: data,
        ys: labels,
        k: classes,
        d,
        l2: config.l2,
    };
    let p = classes * d + classes;
    let mut theta = vec![0.0; p];
    if let ProbeInit::Small { scale } = config.init {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for v in &mut theta[..classes * d] {
            *v = rng.random_range(-1.0..=1.0) * scale;
        }
    }

    let mut grad = vec![0.0; p];
    let mut f = problem.objective(&theta, Some(&mut grad));
    let mut gnorm = norm(&grad);
    let mut trace = ProbeTrace {
        objective: vec![f],
        iterations: 0,
        final_gradient_norm: gnorm,
        converged: gnorm < config.gradient_tolerance,
    };
    let mut step = 1.0;
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut candidate = vec![0.0; p];
    let mut new_grad = vec![0.0; p];

    while !trace.converged && trace.iterations < config.max_iterations {
        if let Some((ptheta, pgrad)) = &prev {
            let mut ss = 0.0;
            let mut sy = 0.0;
            for i in 0..p {
                let s = theta[i] - ptheta[i];
                ss += s * s;
                sy += s * (grad[i] - pgrad[i]);
            }
            if sy > 0.0 {
                step = ss / sy;
            }
        }
        let g2 = gnorm * gnorm;
        let mut accepted = None;
        for _ in 0..60 {
            for i in 0..p {
                candidate[i] = theta[i] - step * grad[i];
            }
            let fc = problem.objective(&candidate, None);
            if fc.is_finite() && fc <= f - 1e-4 * step * g2 {
                accepted = Some(fc);
                break;
            }
            step *= 0.5;
        }
        let Some(fc) = accepted else {
            break;
        };
        prev = Some((theta.clone(), grad.clone()));
        std::mem::swap(&mut theta, &mut candidate);
        f = problem.objective(&theta, Some(&mut new_grad));
        debug_assert!(f <= fc + 1e-12);
        std::mem::swap(&mut grad, &mut new_grad);
        gnorm = norm(&grad);
        trace.iterations += 1;
        trace.objective.push(f);
        trace.final_gradient_norm = gnorm;
        trace.converged = gnorm < config.gradient_tolerance;
    }
    if !f.is_finite() {
        return Err(Error::Numerical("probe objective is not finite".into()));
    }
    probe.weights = theta[..classes * d].to_vec();
    probe.bias = theta[classes * d..].to_vec();
    Ok((probe, trace))
}
