use crate::model::{ModelGrads, SiameseModel};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OptimizerKind {
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl OptimizerKind {
    pub const ADAM: OptimizerKind = OptimizerKind::Adam {
        beta1: 0.9,
        beta2: 0.999,
        eps: 1e-8,
    };

    pub fn name(&self) -> &'static str {
        match self {
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::Adam { .. } => "adam",
        }
    }
}

/// Applies gradient steps to a model. Adam moments are dense, so rows of an
/// embedding table with no gradient in a batch still decay and move.
#[derive(Clone, Debug)]
pub struct Optimizer<T> {
    kind: OptimizerKind,
    lr: f64,
    step: u64,
    first: Vec<Vec<T>>,
    second: Vec<Vec<T>>,
    scratch: Vec<T>,
}

impl<T: Scalar> Optimizer<T> {
    pub fn new(kind: OptimizerKind, lr: f64, model: &SiameseModel<T>) -> Self {
        let zeros = || -> Vec<Vec<T>> {
            match kind {
                OptimizerKind::Sgd => Vec::new(),
                OptimizerKind::Adam { .. } => model
                    .tensors()
                    .iter()
                    .map(|t| vec![T::zero(); t.len()])
                    .collect(),
            }
        };
        Optimizer {
            kind,
            lr,
            step: 0,
            first: zeros(),
            second: zeros(),
            scratch: Vec::new(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn apply(&mut self, model: &mut SiameseModel<T>, grads: &ModelGrads<T>) {
        self.step += 1;
        let lr = T::of(self.lr);
        for (i, param) in model.tensors_mut().into_iter().enumerate() {
            grads.write_dense(i, &mut self.scratch);
            let g = &self.scratch;
            match self.kind {
                OptimizerKind::Sgd => {
                    for (w, &gi) in param.data_mut().iter_mut().zip(g) {
                        *w = *w - lr * gi;
                    }
                }
                OptimizerKind::Adam { beta1, beta2, eps } => {
                    let t = self.step as i32;
                    let (b1, b2) = (T::of(beta1), T::of(beta2));
                    let c1 = T::one() - T::of(beta1.powi(t));
                    let c2 = T::one() - T::of(beta2.powi(t));
                    let eps = T::of(eps);
                    let (m, v) = (&mut self.first[i], &mut self.second[i]);
                    for (k, w) in param.data_mut().iter_mut().enumerate() {
                        let gi = g[k];
                        m[k] = b1 * m[k] + (T::one() - b1) * gi;
                        v[k] = b2 * v[k] + (T::one() - b2) * gi * gi;
                        let m_hat = m[k] / c1;
                        let v_hat = v[k] / c2;
                        *w = *w - lr * m_hat / (v_hat.sqrt() + eps);
                    }
                }
            }
        }
    }
}
