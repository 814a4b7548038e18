use serde::{Deserialize, Serialize};

use super::params::ParamStore;

/// Adam with bias correction; no weight decay.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: u64,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, m: Vec::new(), v: Vec::new(), t: 0 }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// One update of every trainable entry of `store`; `grads[id]` matches `store` ids.
    pub fn step(&mut self, store: &mut ParamStore, grads: &[Vec<f64>]) {
        if self.m.is_empty() {
            self.m = (0..store.len()).map(|i| vec![0.0; store.value(i).len()]).collect();
            self.v = self.m.clone();
        }
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for id in store.trainable_ids() {
            let (m, v) = (&mut self.m[id], &mut self.v[id]);
            let p = &mut store.value_mut(id).data;
            for k in 0..p.len() {
                let g = grads[id][k];
                m[k] = self.beta1 * m[k] + (1.0 - self.beta1) * g;
                v[k] = self.beta2 * v[k] + (1.0 - self.beta2) * g * g;
                let mhat = m[k] / bc1;
                let vhat = v[k] / bc2;
                p[k] -= self.lr * mhat / (vhat.sqrt() + self.eps);
            }
        }
    }
}
