//! Bias-corrected Adam.

use ndarray::{ArrayD, Zip};

use crate::error::{Error, Result};
use crate::model::{Grads, ParamSet};

#[derive(Debug, Clone, PartialEq)]
pub struct OptimState {
    pub m: Vec<ArrayD<f64>>,
    pub v: Vec<ArrayD<f64>>,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub learning_rate: f64,
}

impl OptimState {
    pub fn new(params: &ParamSet, learning_rate: f64) -> Self {
        let zeros = || params.zeros_like().0;
        OptimState {
            m: zeros(),
            v: zeros(),
            step: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            learning_rate,
        }
    }
}

/// One Adam update. Frozen parameters are left untouched.
pub fn adam_step(params: &mut ParamSet, grads: &Grads, state: &mut OptimState) -> Result<()> {
    if grads.0.len() != params.len() || state.m.len() != params.len() {
        return Err(Error::invalid("gradients, moments and parameters differ in count"));
    }
    state.step += 1;
    let (b1, b2, eps, lr) = (state.beta1, state.beta2, state.eps, state.learning_rate);
    let c1 = 1.0 - b1.powi(state.step as i32);
    let c2 = 1.0 - b2.powi(state.step as i32);
    for (i, p) in params.iter_mut().enumerate() {
        let g = &grads.0[i];
        if g.shape() != p.value.shape() || state.m[i].shape() != p.value.shape() {
            return Err(Error::invalid(format!("gradient shape mismatch for {}", p.name)));
        }
        if !p.trainable {
            continue;
        }
        Zip::from(&mut p.value)
            .and(&mut state.m[i])
            .and(&mut state.v[i])
            .and(g)
            .for_each(|x, m, v, &g| {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                *x -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
            });
    }
    Ok(())
}
