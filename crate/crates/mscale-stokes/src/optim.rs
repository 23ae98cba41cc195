//! Optimization pieces: Adam over a slot range, the staircase learning-rate
//! schedule, and the penalty-weight controller.

use crate::autodiff::SlotRange;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Bias-corrected Adam owning one contiguous slot range of the shared
/// parameter vector. Each field network carries its own state.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub range: SlotRange,
    pub t: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl AdamState {
    pub fn new(range: SlotRange) -> Self {
        AdamState { range, t: 0, m: vec![0.0; range.len], v: vec![0.0; range.len] }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - ADAM_BETA1.powi(self.t as i32);
        let c2 = 1.0 - ADAM_BETA2.powi(self.t as i32);
        for i in 0..self.range.len {
            let slot = self.range.start + i;
            let g = grads[slot];
            self.m[i] = ADAM_BETA1 * self.m[i] + (1.0 - ADAM_BETA1) * g;
            self.v[i] = ADAM_BETA2 * self.v[i] + (1.0 - ADAM_BETA2) * g * g;
            let mhat = self.m[i] / c1;
            let vhat = self.v[i] / c2;
            params[slot] -= lr * mhat / (vhat.sqrt() + ADAM_EPS);
        }
    }
}

/// Piecewise-constant schedule: the rate drops by `factor` every
/// `drop_every` epochs.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct LrSchedule {
    pub base: f64,
    pub drop_every: u64,
    pub factor: f64,
}

impl LrSchedule {
    pub fn at(&self, epoch: u64) -> f64 {
        if self.drop_every == 0 {
            return self.base;
        }
        self.base * self.factor.powi((epoch / self.drop_every) as i32)
    }
}

/// Adjusts the Poisson penalty weight from the evaluation errors: when the
/// velocity error runs far ahead of the pressure error the pressure
/// equation needs more weight, and vice versa. Both tests are strict and
/// mutually exclusive, and the weight never drops below `min_alpha`.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct AlphaAdapter {
    pub enabled: bool,
    pub check_every: u64,
    pub step: f64,
    pub min_alpha: f64,
    pub ratio: f64,
}

impl AlphaAdapter {
    pub fn standard(enabled: bool) -> Self {
        AlphaAdapter { enabled, check_every: 50, step: 500.0, min_alpha: 500.0, ratio: 2.0 }
    }

    /// Checked at the end of a 0-based epoch, so the first adaptation
    /// happens after `check_every` full epochs.
    pub fn should_check(&self, epoch: u64) -> bool {
        self.enabled && self.check_every > 0 && (epoch + 1) % self.check_every == 0
    }

    pub fn adapt(&self, alpha: f64, err_u: f64, err_p: f64) -> f64 {
        if err_u > self.ratio * err_p {
            alpha + self.step
        } else if err_p > self.ratio * err_u && alpha > self.min_alpha {
            alpha - self.step
        } else {
            alpha
        }
    }
}
