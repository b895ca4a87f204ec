//! Adam optimizer over a [`ParamStore`].

use crate::error::{dim_err, Result};
use crate::params::ParamStore;
use crate::scalar::Scalar;

/// Hyperparameters plus per-parameter first/second moment estimates.
#[derive(Debug, Clone)]
pub struct AdamState<T> {
    pub lr: T,
    pub beta1: T,
    pub beta2: T,
    pub epsilon: T,
    step: u64,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
}

impl<T: Scalar> AdamState<T> {
    /// Adam with beta1 = 0.9, beta2 = 0.999, epsilon = 1e-8.
    pub fn new(lr: T) -> Self {
        Self {
            lr,
            beta1: T::lit(0.9),
            beta2: T::lit(0.999),
            epsilon: T::lit(1e-8),
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Applies one bias-corrected Adam update in place.
    ///
    /// `grads` is indexed by parameter id (see
    /// [`Tape::param_grads`](crate::tape::Tape::param_grads)). Frozen entries
    /// and entries without a gradient are left untouched, but still count
    /// towards the shared step counter.
    pub fn step(&mut self, store: &mut ParamStore<T>, grads: &[Option<Vec<T>>]) -> Result<()> {
        if grads.len() > store.len() {
            return Err(dim_err("adam_step", format!("at most {} gradients", store.len()), grads.len()));
        }
        for (id, g) in store.ids().zip(grads) {
            if let Some(g) = g {
                let n = store.get(id).numel();
                if g.len() != n {
                    return Err(dim_err("adam_step", format!("gradient of length {n} for {}", store.entry(id).name), g.len()));
                }
            }
        }
        if self.m.len() != store.len() {
            self.m = store.entries().iter().map(|e| vec![T::zero(); e.tensor.numel()]).collect();
            self.v = self.m.clone();
        }

        self.step += 1;
        let t = i32::try_from(self.step).unwrap_or(i32::MAX);
        let bc1 = T::one() - self.beta1.powi(t);
        let bc2 = T::one() - self.beta2.powi(t);
        let (b1, b2) = (self.beta1, self.beta2);

        for (id, g) in store.ids().zip(grads) {
            let Some(g) = g else { continue };
            if !store.is_trainable(id) {
                continue;
            }
            let (m, v) = (&mut self.m[id.index()], &mut self.v[id.index()]);
            let p = store.get_mut(id).data_mut();
            for i in 0..p.len() {
                m[i] = b1 * m[i] + (T::one() - b1) * g[i];
                v[i] = b2 * v[i] + (T::one() - b2) * g[i] * g[i];
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                p[i] -= self.lr * m_hat / (v_hat.sqrt() + self.epsilon);
            }
        }
        Ok(())
    }
}
