//! One-shot knowledge distillation.
//!
//! The server trains its global model against fixed teacher logits: KL
//! divergence between temperature-softened class distributions (scaled by
//! tau^2 so gradients stay comparable across temperatures), or the plain
//! mean-squared logit gap. At high temperature the tau^2-scaled KL gradient
//! converges to the L2 gradient for zero-mean logits; both losses restrict
//! to covered classes only.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fl::logits::LogitMatrix;
use crate::fl::ServerState;
use crate::nn::optim::{adam_step, OptimizerState};
use crate::rng::seeded;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistillLossMode {
    Kl,
    L2,
}

/// Distillation settings. Defaults: tau 4, KL mode, 200 Adam steps at
/// lr 1e-3 with batch size 512.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DistillConfig {
    pub temperature: f64,
    pub mode: DistillLossMode,
    pub steps: usize,
    pub batch_size: usize,
    pub lr: f64,
}

impl Default for DistillConfig {
    fn default() -> Self {
        Self { temperature: 4.0, mode: DistillLossMode::Kl, steps: 200, batch_size: 512, lr: 1e-3 }
    }
}

impl DistillConfig {
    pub fn validate(&self) -> Result<()> {
        if !crate::error::positive(self.temperature) {
            return Err(Error::InvalidArgument(format!(
                "temperature {} must be positive",
                self.temperature
            )));
        }
        if self.steps == 0 || self.batch_size == 0 {
            return Err(Error::InvalidArgument(
                "distillation needs at least one step and batch size >= 1".into(),
            ));
        }
        // lr = 0 is a legal no-op (distillation disabled).
        if !crate::error::non_negative(self.lr) {
            return Err(Error::InvalidArgument(format!("lr {} must be >= 0", self.lr)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistillMetrics {
    pub steps: usize,
    pub initial_loss: f64,
    pub final_loss: f64,
}

/// Distillation loss and its gradient w.r.t. the student logits, over the
/// covered classes only.
pub fn kd_loss(
    student_logits: &Tensor<f32>,
    teacher_logits: &Tensor<f32>,
    covered: &[bool],
    cfg: &DistillConfig,
) -> Result<(f64, Tensor<f32>)> {
    cfg.validate()?;
    if student_logits.shape() != teacher_logits.shape() {
        return Err(Error::InvalidArgument(format!(
            "student logits {:?} vs teacher logits {:?}",
            student_logits.shape(),
            teacher_logits.shape()
        )));
    }
    let [n, t] = match student_logits.shape() {
        [n, t] => [*n, *t],
        other => {
            return Err(Error::InvalidArgument(format!("logits must be [N,T], got {other:?}")))
        }
    };
    if covered.len() != t {
        return Err(Error::InvalidArgument(format!(
            "coverage mask has {} entries for {t} classes",
            covered.len()
        )));
    }
    let cov: Vec<usize> = (0..t).filter(|&c| covered[c]).collect();
    if cov.is_empty() {
        return Err(Error::NoCoveredClasses);
    }

    let s = student_logits.data();
    let z = teacher_logits.data();
    let mut grad = Tensor::zeros(vec![n, t]);
    let g = grad.data_mut();
    let inv_n = 1.0 / n as f64;
    let mut total = 0.0f64;

    match cfg.mode {
        DistillLossMode::Kl => {
            let tau = cfg.temperature;
            for i in 0..n {
                let p = softened(&cov, &z[i * t..(i + 1) * t], tau);
                let q = softened(&cov, &s[i * t..(i + 1) * t], tau);
                let mut row = 0.0f64;
                for (k, &class) in cov.iter().enumerate() {
                    if p[k] > 0.0 {
                        row += p[k] * (p[k] / q[k].max(f64::MIN_POSITIVE)).ln();
                    }
                    // d(tau^2 KL)/ds = tau * (q - p), averaged over the batch.
                    g[i * t + class] = (tau * (q[k] - p[k]) * inv_n) as f32;
                }
                total += row * tau * tau;
            }
        }
        DistillLossMode::L2 => {
            let k = cov.len() as f64;
            for i in 0..n {
                let mut row = 0.0f64;
                for &class in &cov {
                    let diff = s[i * t + class] as f64 - z[i * t + class] as f64;
                    row += diff * diff;
                    g[i * t + class] = (2.0 * diff * inv_n / k) as f32;
                }
                total += row / k;
            }
        }
    }
    Ok((total * inv_n, grad))
}

fn softened(cov: &[usize], logits: &[f32], tau: f64) -> Vec<f64> {
    let scaled: Vec<f64> = cov.iter().map(|&c| logits[c] as f64 / tau).collect();
    let max = scaled.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let exps: Vec<f64> = scaled.iter().map(|&v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Train the server's global model against fixed teacher logits for
/// `cfg.steps` minibatch Adam steps. The teacher is never recomputed; this
/// is the one-shot, offline half of the pipeline.
pub fn distill(server: &mut ServerState, teacher: &LogitMatrix, seed: u64) -> Result<DistillMetrics> {
    let cfg = server.distill;
    cfg.validate()?;
    if teacher.samples() != server.public.len() {
        return Err(Error::InvalidArgument(format!(
            "teacher covers {} samples, public set has {}",
            teacher.samples(),
            server.public.len()
        )));
    }
    let covered = teacher.coverage_mask();
    let n = server.public.len();
    let batch_size = cfg.batch_size.min(n);
    let mut rng = seeded(seed);
    let mut state = OptimizerState::new(&server.global);
    let mut order: Vec<usize> = (0..n).collect();
    let mut initial_loss = None;
    let mut final_loss = 0.0;

    let mut step = 0usize;
    'outer: loop {
        order.shuffle(&mut rng);
        for chunk in order.chunks(batch_size) {
            if step == cfg.steps {
                break 'outer;
            }
            let batch = server.public.batch(chunk);
            let pass = server.global.forward_with_trace(&batch)?;
            let teacher_rows = teacher.rows(chunk);
            let (loss, grad_logits) = kd_loss(&pass.logits, &teacher_rows, &covered, &cfg)?;
            if !loss.is_finite() {
                return Err(Error::NanLoss { step, lr: cfg.lr });
            }
            initial_loss.get_or_insert(loss);
            final_loss = loss;
            let grads = server.global.backward(&pass, &grad_logits)?;
            let mut params = server.global.params_mut();
            adam_step(&mut params, &grads.flat(), &mut state, cfg.lr)?;
            step += 1;
        }
    }
    Ok(DistillMetrics { steps: step, initial_loss: initial_loss.unwrap_or(0.0), final_loss })
}
