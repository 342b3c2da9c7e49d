//! ADAM with bias correction, plus the stepwise learning-rate decay.

use crate::error::{Error, Result};
use crate::nnet::model::ModelParams;

/// Optimizer state: first/second moment per parameter, the step counter the
/// bias correction needs, and the hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct OptState {
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
    /// Learning rate applied by the next [`adam_step`]; the training loop
    /// refreshes this from [`lr_schedule`] every iteration.
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl OptState {
    /// Fresh state with the standard coefficients (0.9, 0.999, 1e-8).
    pub fn new(param_count: usize, lr: f64) -> Result<OptState> {
        if !(lr.is_finite() && lr >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "learning rate must be non-negative, got {lr}"
            )));
        }
        Ok(OptState {
            m: vec![0.0; param_count],
            v: vec![0.0; param_count],
            step: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        })
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// One ADAM update in place:
///
/// ```text
/// m <- b1*m + (1-b1)*g        mhat = m / (1 - b1^t)
/// v <- b2*v + (1-b2)*g^2      vhat = v / (1 - b2^t)
/// p <- p - lr * mhat / (sqrt(vhat) + eps)
/// ```
///
/// A zero learning rate still advances the moments and the step counter but
/// leaves the parameters untouched.
pub fn adam_step(params: &mut ModelParams, grads: &ModelParams, state: &mut OptState) -> Result<()> {
    if params.dims() != grads.dims() {
        return Err(Error::DimMismatch(
            "gradient dimensions disagree with the parameters".into(),
        ));
    }
    if state.m.len() != params.flat().len() {
        return Err(Error::DimMismatch(format!(
            "optimizer tracks {} parameters, model has {}",
            state.m.len(),
            params.flat().len()
        )));
    }

    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);

    let p = params.flat_mut();
    for i in 0..p.len() {
        let g = grads.flat()[i];
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
        let mhat = state.m[i] / bc1;
        let vhat = state.v[i] / bc2;
        p[i] -= state.lr * mhat / (vhat.sqrt() + state.epsilon);
    }
    Ok(())
}

/// Stepwise decay: the base rate multiplied by 0.65 once per completed
/// `decay_every` iterations. `iteration` counts from zero.
pub fn lr_schedule(base_lr: f64, iteration: u64, decay_every: u64) -> Result<f64> {
    if decay_every == 0 {
        return Err(Error::InvalidConfig("decay interval must be positive".into()));
    }
    if !(base_lr.is_finite() && base_lr >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "base learning rate must be non-negative, got {base_lr}"
        )));
    }
    let mut lr = base_lr;
    for _ in 0..iteration / decay_every {
        lr *= 0.65;
    }
    Ok(lr)
}
