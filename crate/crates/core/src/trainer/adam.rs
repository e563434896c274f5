use std::collections::HashMap;

use crate::nn::{Gradients, Tensor};
use crate::params::{BoundParams, ModelParams};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// Adam with bias correction; moment state keyed by parameter name.
#[derive(Debug, Default)]
pub struct Adam {
    step: i32,
    moments: HashMap<String, (Tensor, Tensor)>,
}

impl Adam {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn steps(&self) -> i32 {
        self.step
    }

    /// Applies one update. Parameters without a gradient are left untouched.
    pub fn update(&mut self, params: &mut ModelParams, bound: &BoundParams, grads: &Gradients, lr: f64) {
        self.step += 1;
        let c1 = 1.0 - BETA1.powi(self.step);
        let c2 = 1.0 - BETA2.powi(self.step);
        for (name, p) in params.iter_mut() {
            let Some(g) = bound.var(name).ok().and_then(|v| grads.get(v)) else {
                continue;
            };
            let (m, v) = self
                .moments
                .entry(name.clone())
                .or_insert_with(|| (Tensor::zeros(p.shape()), Tensor::zeros(p.shape())));
            for (((pi, &gi), mi), vi) in p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.data_mut().iter_mut())
                .zip(v.data_mut().iter_mut())
            {
                *mi = BETA1 * *mi + (1.0 - BETA1) * gi;
                *vi = BETA2 * *vi + (1.0 - BETA2) * gi * gi;
                let m_hat = *mi / c1;
                let v_hat = *vi / c2;
                *pi -= lr * m_hat / (v_hat.sqrt() + EPSILON);
            }
        }
    }
}
