//! Adam with bias correction. Moment state is keyed by parameter name so it
//! survives any traversal order and can be inspected in tests.

use std::collections::BTreeMap;

use super::Param;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    state: BTreeMap<String, Moments>,
}

#[derive(Debug, Clone)]
struct Moments {
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(lr: f64) -> Adam {
        Adam { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, t: 0, state: BTreeMap::new() }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    /// Starts one optimizer step; call before the per-parameter updates so
    /// bias correction sees a consistent t across all of them.
    pub fn begin_step(&mut self) {
        self.t += 1;
    }

    /// Applies the Adam update for one parameter using its accumulated
    /// gradient. The gradient is left untouched (zeroing is the caller's
    /// schedule).
    pub fn update(&mut self, name: &str, p: &mut Param) -> Result<()> {
        if self.t == 0 {
            return Err(Error::Data("adam: update before begin_step".into()));
        }
        for (i, g) in p.grad.data.iter().enumerate() {
            if !g.is_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite gradient in parameter {name} at index {i}"
                )));
            }
        }
        let n = p.numel();
        let slot = self.state.entry(name.to_string()).or_insert_with(|| Moments {
            m: vec![0.0; n],
            v: vec![0.0; n],
        });
        if slot.m.len() != n {
            return Err(Error::shape(
                "adam state",
                format!("{} values", slot.m.len()),
                format!("{n} values"),
            ));
        }
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..n {
            let g = p.grad.data[i];
            slot.m[i] = self.beta1 * slot.m[i] + (1.0 - self.beta1) * g;
            slot.v[i] = self.beta2 * slot.v[i] + (1.0 - self.beta2) * g * g;
            let mhat = slot.m[i] / bc1;
            let vhat = slot.v[i] / bc2;
            p.value.data[i] -= self.lr * mhat / (vhat.sqrt() + self.eps);
        }
        Ok(())
    }
}
