//! Adam with bias correction, operating on flat parameter slices so any
//! collection of tensors can share one optimizer state.

use serde::{Deserialize, Serialize};

use crate::error::{CannError, Result};

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;

/// First/second moment accumulators per tensor plus the shared step counter.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdamState {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    step: u64,
}

impl AdamState {
    /// One moment buffer per tensor, sized by `tensor_lengths`.
    pub fn new(tensor_lengths: &[usize]) -> Self {
        AdamState {
            m: tensor_lengths.iter().map(|&l| vec![0.0; l]).collect(),
            v: tensor_lengths.iter().map(|&l| vec![0.0; l]).collect(),
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One Adam update over all tensors. `apply` must visit parameter/gradient
    /// slice pairs in the same order every call; it receives a per-tensor
    /// updater to invoke once per pair.
    pub fn step<F>(&mut self, lr: f64, mut apply: F) -> Result<()>
    where
        F: FnMut(&mut dyn FnMut(&mut [f64], &[f64]) -> Result<()>) -> Result<()>,
    {
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - BETA1.powi(t);
        let bc2 = 1.0 - BETA2.powi(t);
        let mut idx = 0usize;
        let m = &mut self.m;
        let v = &mut self.v;
        apply(&mut |params: &mut [f64], grads: &[f64]| {
            if idx >= m.len() || params.len() != m[idx].len() || grads.len() != params.len() {
                return Err(CannError::shape(format!(
                    "adam tensor {idx} shape mismatch"
                )));
            }
            if grads.iter().any(|g| !g.is_finite()) {
                return Err(CannError::Diverged(format!(
                    "non-finite gradient in tensor {idx}"
                )));
            }
            let (mi, vi) = (&mut m[idx], &mut v[idx]);
            for k in 0..params.len() {
                let g = grads[k];
                mi[k] = BETA1 * mi[k] + (1.0 - BETA1) * g;
                vi[k] = BETA2 * vi[k] + (1.0 - BETA2) * g * g;
                let m_hat = mi[k] / bc1;
                let v_hat = vi[k] / bc2;
                params[k] -= lr * m_hat / (v_hat.sqrt() + EPS);
            }
            idx += 1;
            Ok(())
        })
    }
}
