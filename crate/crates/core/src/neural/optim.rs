use serde::{Deserialize, Serialize};

use super::layer::Param;
use super::tensor::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Optimizer {
    Adam {
        lr: f64,
        beta1: f64,
        beta2: f64,
        eps: f64,
    },
    Sgd {
        lr: f64,
    },
}

impl Optimizer {
    pub fn adam(lr: f64) -> Self {
        Optimizer::Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl Default for Optimizer {
    fn default() -> Self {
        Optimizer::adam(1e-3)
    }
}

/// Moment accumulators for every parameter tensor, in the order the
/// parameters are presented to [`OptimizerState::step`].
#[derive(Debug, Clone)]
pub struct OptimizerState<T> {
    pub config: Optimizer,
    pub steps: u64,
    first: Vec<Vec<T>>,
    second: Vec<Vec<T>>,
}

impl<T: Real> OptimizerState<T> {
    pub fn new(config: Optimizer) -> Self {
        OptimizerState {
            config,
            steps: 0,
            first: Vec::new(),
            second: Vec::new(),
        }
    }

    /// Applies one update from the accumulated gradients. Called once per
    /// batch.
    pub fn step<'a>(&mut self, params: impl IntoIterator<Item = &'a mut Param<T>>) {
        self.steps += 1;
        match self.config {
            Optimizer::Sgd { lr } => {
                let lr = T::of(lr);
                for p in params {
                    for (w, g) in p.value.data_mut().iter_mut().zip(p.grad.data()) {
                        *w -= lr * *g;
                    }
                }
            }
            Optimizer::Adam {
                lr,
                beta1,
                beta2,
                eps,
            } => {
                let t = self.steps as i32;
                let c1 = T::of(1.0 - beta1.powi(t));
                let c2 = T::of(1.0 - beta2.powi(t));
                let (b1, b2, lr, eps) = (T::of(beta1), T::of(beta2), T::of(lr), T::of(eps));
                let one = T::one();
                for (i, p) in params.into_iter().enumerate() {
                    if self.first.len() <= i {
                        self.first.push(vec![T::zero(); p.value.len()]);
                        self.second.push(vec![T::zero(); p.value.len()]);
                    }
                    let (m, v) = (&mut self.first[i], &mut self.second[i]);
                    debug_assert_eq!(m.len(), p.value.len());
                    for (((w, g), m), v) in p
                        .value
                        .data_mut()
                        .iter_mut()
                        .zip(p.grad.data())
                        .zip(m.iter_mut())
                        .zip(v.iter_mut())
                    {
                        *m = b1 * *m + (one - b1) * *g;
                        *v = b2 * *v + (one - b2) * *g * *g;
                        let m_hat = *m / c1;
                        let v_hat = *v / c2;
                        *w -= lr * m_hat / (v_hat.sqrt() + eps);
                    }
                }
            }
        }
    }
}

/// One Adam update on a set of parameters.
pub fn adam_step<'a, T: Real>(
    params: impl IntoIterator<Item = &'a mut Param<T>>,
    state: &mut OptimizerState<T>,
) {
    state.step(params)
}
