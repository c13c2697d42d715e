//! Optimizers and the learning-rate schedule.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::network::{Gradients, Network};
use crate::tensor::Tensor;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Which optimizer a training loop uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptimizerKind {
    SgdMomentum,
    Adam,
}

/// Per-parameter optimizer buffers, aligned with [`Network::params`] order.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    /// SGD momentum buffers, or Adam first moments.
    m: Vec<Tensor<f32>>,
    /// Adam second moments (unused by SGD).
    v: Vec<Tensor<f32>>,
    /// Adam step counter.
    step: u64,
}

impl OptimizerState {
    /// Fresh zeroed state mirroring the network's parameter shapes.
    pub fn new(net: &Network<f32>) -> Self {
        let m: Vec<_> = net.params().iter().map(|p| Tensor::zeros(p.shape().to_vec())).collect();
        let v = m.clone();
        Self { m, v, step: 0 }
    }
}

/// One SGD step with momentum and decoupled-from-nothing weight decay folded
/// into the gradient:
///
/// v <- momentum * v + grad + weight_decay * param
/// param <- param - lr * v
pub fn sgd_momentum_step(
    params: &mut [&mut Tensor<f32>],
    grads: &[&Tensor<f32>],
    state: &mut OptimizerState,
    lr: f64,
    momentum: f64,
    weight_decay: f64,
) -> Result<()> {
    check_alignment(params, grads, state)?;
    let (lr, momentum, wd) = (lr as f32, momentum as f32, weight_decay as f32);
    for ((param, grad), buf) in params.iter_mut().zip(grads).zip(state.m.iter_mut()) {
        for ((p, &g), v) in param.data_mut().iter_mut().zip(grad.data()).zip(buf.data_mut()) {
            *v = momentum * *v + g + wd * *p;
            *p -= lr * *v;
        }
    }
    Ok(())
}

/// One Adam step (beta1 = 0.9, beta2 = 0.999, eps = 1e-8) with bias
/// correction.
pub fn adam_step(
    params: &mut [&mut Tensor<f32>],
    grads: &[&Tensor<f32>],
    state: &mut OptimizerState,
    lr: f64,
) -> Result<()> {
    check_alignment(params, grads, state)?;
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - ADAM_BETA1.powi(t);
    let bc2 = 1.0 - ADAM_BETA2.powi(t);
    for (((param, grad), m), v) in
        params.iter_mut().zip(grads).zip(state.m.iter_mut()).zip(state.v.iter_mut())
    {
        for (((p, &g), m), v) in
            param.data_mut().iter_mut().zip(grad.data()).zip(m.data_mut()).zip(v.data_mut())
        {
            let g = g as f64;
            let mf = ADAM_BETA1 * *m as f64 + (1.0 - ADAM_BETA1) * g;
            let vf = ADAM_BETA2 * *v as f64 + (1.0 - ADAM_BETA2) * g * g;
            *m = mf as f32;
            *v = vf as f32;
            let update = lr * (mf / bc1) / ((vf / bc2).sqrt() + ADAM_EPS);
            *p -= update as f32;
        }
    }
    Ok(())
}

fn check_alignment(
    params: &[&mut Tensor<f32>],
    grads: &[&Tensor<f32>],
    state: &OptimizerState,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::InvalidArgument(format!(
            "optimizer arity mismatch: {} params, {} grads, {} buffers",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    for (i, (p, g)) in params.iter().zip(grads).enumerate() {
        if p.shape() != g.shape() {
            return Err(Error::InvalidArgument(format!(
                "param {i} shape {:?} does not match grad shape {:?}",
                p.shape(),
                g.shape()
            )));
        }
    }
    Ok(())
}

/// Apply one optimizer step to a whole network.
pub fn apply_step(
    net: &mut Network<f32>,
    grads: &Gradients<f32>,
    state: &mut OptimizerState,
    kind: OptimizerKind,
    lr: f64,
    momentum: f64,
    weight_decay: f64,
) -> Result<()> {
    let mut params = net.params_mut();
    let grads = grads.flat();
    match kind {
        OptimizerKind::SgdMomentum => {
            sgd_momentum_step(&mut params, &grads, state, lr, momentum, weight_decay)
        }
        OptimizerKind::Adam => adam_step(&mut params, &grads, state, lr),
    }
}

/// Cosine-annealed learning rate:
/// lr(step) = lr_min + 0.5 * (lr_max - lr_min) * (1 + cos(pi * step / total)).
/// Steps past `total_steps` clamp to `lr_min`.
pub fn cosine_anneal_lr(step: usize, total_steps: usize, lr_max: f64, lr_min: f64) -> f64 {
    if step >= total_steps {
        return lr_min;
    }
    let progress = step as f64 / total_steps as f64;
    lr_min + 0.5 * (lr_max - lr_min) * (1.0 + (std::f64::consts::PI * progress).cos())
}

/// Learning-rate schedule over a training run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LrSchedule {
    Constant { lr: f64 },
    Cosine { lr_max: f64, lr_min: f64 },
}

impl LrSchedule {
    pub fn lr_at(&self, step: usize, total_steps: usize) -> f64 {
        match *self {
            LrSchedule::Constant { lr } => lr,
            LrSchedule::Cosine { lr_max, lr_min } => {
                cosine_anneal_lr(step, total_steps, lr_max, lr_min)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            LrSchedule::Constant { lr } => lr > 0.0,
            LrSchedule::Cosine { lr_max, lr_min } => lr_max >= lr_min && lr_min > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "learning-rate schedule {self:?} violates lr_max >= lr_min > 0"
            )))
        }
    }
}

/// Local-training hyperparameters. Defaults follow the reference recipe:
/// SGD with momentum 0.9, weight decay 3e-4, cosine annealing from 0.0025
/// to 0.001, batch size 16. Epochs default to a desk-scale 5.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub optimizer: OptimizerKind,
    pub schedule: LrSchedule,
    pub momentum: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub epochs: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            optimizer: OptimizerKind::SgdMomentum,
            schedule: LrSchedule::Cosine { lr_max: 0.0025, lr_min: 0.001 },
            momentum: 0.9,
            weight_decay: 3e-4,
            batch_size: 16,
            epochs: 5,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch size must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidArgument(format!(
                "momentum {} outside [0,1)",
                self.momentum
            )));
        }
        if !crate::error::non_negative(self.weight_decay) {
            return Err(Error::InvalidArgument(format!(
                "weight decay {} must be >= 0",
                self.weight_decay
            )));
        }
        Ok(())
    }
}
