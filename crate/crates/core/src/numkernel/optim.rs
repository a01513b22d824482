use serde::{Deserialize, Serialize};

use super::{ParamId, ParamStore, Tensor2};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Rescale gradients whose global L2 norm exceeds this value.
    pub clip_norm: Option<f64>,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            kind: OptimizerKind::Adam,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            clip_norm: Some(5.0),
        }
    }
}

impl OptimizerConfig {
    pub fn sgd(learning_rate: f64) -> Self {
        OptimizerConfig {
            kind: OptimizerKind::Sgd,
            learning_rate,
            clip_norm: None,
            ..Self::default()
        }
    }
}

/// Optimizer state (Adam moments) for one [`ParamStore`].
#[derive(Debug, Clone)]
pub struct Optimizer {
    config: OptimizerConfig,
    steps: u64,
    moments: Vec<(Tensor2, Tensor2)>,
}

impl Optimizer {
    pub fn new(config: OptimizerConfig, store: &ParamStore) -> Self {
        let moments = store
            .ids()
            .map(|id| {
                let (r, c) = store.value(id).shape();
                (Tensor2::zeros(r, c), Tensor2::zeros(r, c))
            })
            .collect();
        Optimizer {
            config,
            steps: 0,
            moments,
        }
    }

    pub fn config(&self) -> &OptimizerConfig {
        &self.config
    }

    /// Applies one update from the accumulated gradients. Gradients are left
    /// in place; callers zero them before the next backward pass.
    pub fn step(&mut self, store: &mut ParamStore) -> Result<()> {
        for id in store.ids() {
            if !store.grad(id).is_finite() {
                return Err(Error::Numerical(format!(
                    "non-finite gradient in parameter {}",
                    store.name(id)
                )));
            }
        }
        let scale = match self.config.clip_norm {
            Some(max) => {
                let norm = store.grad_norm();
                if norm > max {
                    max / norm
                } else {
                    1.0
                }
            }
            None => 1.0,
        };
        self.steps += 1;
        let lr = self.config.learning_rate;
        let ids: Vec<ParamId> = store.ids().collect();
        match self.config.kind {
            OptimizerKind::Sgd => {
                for id in ids {
                    let g = store.grad(id).clone();
                    let w = store.value_mut(id);
                    for (w, g) in w.data_mut().iter_mut().zip(g.data()) {
                        *w -= lr * scale * g;
                    }
                }
            }
            OptimizerKind::Adam => {
                let (b1, b2, eps) = (self.config.beta1, self.config.beta2, self.config.epsilon);
                let c1 = 1.0 - b1.powi(self.steps as i32);
                let c2 = 1.0 - b2.powi(self.steps as i32);
                for id in ids {
                    let g = store.grad(id).clone();
                    let (m, v) = &mut self.moments[id.0];
                    let w = store.value_mut(id);
                    for (((w, &g), m), v) in w
                        .data_mut()
                        .iter_mut()
                        .zip(g.data())
                        .zip(m.data_mut())
                        .zip(v.data_mut())
                    {
                        let g = g * scale;
                        *m = b1 * *m + (1.0 - b1) * g;
                        *v = b2 * *v + (1.0 - b2) * g * g;
                        let m_hat = *m / c1;
                        let v_hat = *v / c2;
                        *w -= lr * m_hat / (v_hat.sqrt() + eps);
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkernel::Tape;

    fn quadratic_store(w0: f64) -> (ParamStore, ParamId) {
        let mut store = ParamStore::new();
        let id = store.add("w", Tensor2::new(1, 1, vec![w0]).unwrap()).unwrap();
        (store, id)
    }

    fn loss_and_grad(store: &mut ParamStore, id: ParamId) -> f64 {
        store.zero_grads();
        let mut tape = Tape::new();
        let w = tape.param(store, id);
        let sq = tape.mul(w, w).unwrap();
        let loss = tape.value(sq).get(0, 0);
        tape.backward(sq, store).unwrap();
        loss
    }

    #[test]
    fn sgd_on_square_takes_expected_step() {
        let (mut store, id) = quadratic_store(1.0);
        let mut opt = Optimizer::new(OptimizerConfig::sgd(0.1), &store);
        loss_and_grad(&mut store, id);
        opt.step(&mut store).unwrap();
        assert!((store.value(id).get(0, 0) - 0.8).abs() < 1e-15);
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        for config in [OptimizerConfig::sgd(0.5), OptimizerConfig::default()] {
            let (mut store, id) = quadratic_store(0.7);
            let mut opt = Optimizer::new(config, &store);
            opt.step(&mut store).unwrap();
            assert_eq!(store.value(id).get(0, 0), 0.7);
        }
    }

    #[test]
    fn sgd_descends_monotonically_on_convex_quadratic() {
        let (mut store, id) = quadratic_store(3.0);
        let mut opt = Optimizer::new(OptimizerConfig::sgd(0.05), &store);
        let mut last = f64::INFINITY;
        for _ in 0..200 {
            let loss = loss_and_grad(&mut store, id);
            assert!(loss <= last);
            last = loss;
            opt.step(&mut store).unwrap();
        }
        assert!(last < 1e-8);
    }

    #[test]
    fn nan_gradient_aborts() {
        let (mut store, id) = quadratic_store(1.0);
        store.grad_mut(id).set(0, 0, f64::NAN);
        let mut opt = Optimizer::new(OptimizerConfig::default(), &store);
        assert!(matches!(opt.step(&mut store), Err(Error::Numerical(_))));
    }
}
