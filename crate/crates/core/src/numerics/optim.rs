use std::f64::consts::PI;

use super::ParamStore;
use crate::error::{Error, Result};

/// Momentum SGD with L2 weight decay folded into the gradient.
///
/// `v <- momentum * v + (g + weight_decay * w)`, then `w <- w - lr * v`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sgd {
    pub momentum: f64,
    pub weight_decay: f64,
}

impl Default for Sgd {
    fn default() -> Self {
        Self {
            momentum: 0.9,
            weight_decay: 1e-4,
        }
    }
}

impl Sgd {
    pub fn new(momentum: f64, weight_decay: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&momentum) {
            return Err(Error::config(format!("momentum {momentum} outside [0, 1)")));
        }
        if !(weight_decay >= 0.0 && weight_decay.is_finite()) {
            return Err(Error::config(format!("weight decay {weight_decay} must be >= 0")));
        }
        Ok(Self {
            momentum,
            weight_decay,
        })
    }

    /// Applies one update to every parameter and clears the gradients.
    pub fn step(&self, params: &mut ParamStore, lr: f64) -> Result<()> {
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(Error::config(format!("learning rate {lr} must be positive")));
        }
        for p in params.iter() {
            if !p.grad().is_finite() {
                return Err(Error::numerical(
                    "sgd_step",
                    format!("non-finite gradient for {}", p.name),
                ));
            }
        }
        for p in params.iter_mut() {
            let grad = p.grad();
            let value = p.value.as_mut_slice();
            let velocity = p.velocity.as_mut_slice();
            for ((w, v), g) in value.iter_mut().zip(velocity.iter_mut()).zip(grad.as_slice()) {
                *v = self.momentum * *v + (g + self.weight_decay * *w);
                *w -= lr * *v;
            }
            p.zero_grad();
        }
        Ok(())
    }
}

/// Half-cosine decay from `lr0` at epoch 1 towards 0 at epoch `total + 1`.
///
/// `epoch` is 1-based and the rate is held constant within an epoch.
pub fn cosine_anneal(lr0: f64, epoch: usize, total: usize) -> Result<f64> {
    if total == 0 {
        return Err(Error::config("cosine schedule needs at least one epoch"));
    }
    if epoch == 0 || epoch > total {
        return Err(Error::config(format!(
            "epoch {epoch} outside 1..={total}"
        )));
    }
    let progress = (epoch - 1) as f64 / total as f64;
    Ok(0.5 * lr0 * (1.0 + (PI * progress).cos()))
}
