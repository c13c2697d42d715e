//! Local client training and evaluation.

use rand::seq::SliceRandom;

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::fl::ClientState;
use crate::nn::loss::{accuracy, cross_entropy};
use crate::nn::network::Network;
use crate::nn::optim::{apply_step, OptimizerState};
use crate::rng::seeded;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainMetrics {
    pub steps: usize,
    /// Mean loss over the final epoch's batches.
    pub final_loss: f64,
    /// Accuracy on the client's own shard after training.
    pub train_accuracy: f64,
}

/// Train the client's model in place on its private shard, following its
/// TrainConfig. Deterministic for a fixed client seed; a non-finite loss
/// aborts with step and learning-rate diagnostics.
pub fn local_train(client: &mut ClientState) -> Result<TrainMetrics> {
    let cfg = client.train;
    cfg.validate()?;
    let n = client.data.len();
    if n == 0 {
        return Err(Error::Data(format!("client {} has an empty shard", client.id)));
    }
    let batches_per_epoch = n.div_ceil(cfg.batch_size);
    let total_steps = cfg.epochs * batches_per_epoch;
    let mut rng = seeded(client.seed);
    let mut state = OptimizerState::new(&client.model);
    let mut indices: Vec<usize> = (0..n).collect();
    let mut step = 0usize;
    let mut last_epoch_loss = 0.0f64;

    for _epoch in 0..cfg.epochs {
        indices.shuffle(&mut rng);
        let mut epoch_loss = 0.0f64;
        for chunk in indices.chunks(cfg.batch_size) {
            let lr = cfg.schedule.lr_at(step, total_steps);
            let (batch, labels) = client.data.batch(chunk);
            let pass = client.model.forward_with_trace(&batch)?;
            let (loss, grad_logits) = cross_entropy(&pass.logits, &labels)?;
            if !loss.is_finite() {
                return Err(Error::NanLoss { step, lr });
            }
            let grads = client.model.backward(&pass, &grad_logits)?;
            apply_step(
                &mut client.model,
                &grads,
                &mut state,
                cfg.optimizer,
                lr,
                cfg.momentum,
                cfg.weight_decay,
            )?;
            epoch_loss += loss;
            step += 1;
        }
        last_epoch_loss = epoch_loss / batches_per_epoch as f64;
    }

    let (eval_loss, train_accuracy) = evaluate(&client.model, &client.data, 256)?;
    Ok(TrainMetrics {
        steps: step,
        final_loss: if cfg.epochs == 0 { eval_loss } else { last_epoch_loss },
        train_accuracy,
    })
}

/// Mean loss and top-1 accuracy of a model over a dataset.
pub fn evaluate(net: &Network<f32>, ds: &LabeledDataset, batch_size: usize) -> Result<(f64, f64)> {
    if ds.is_empty() {
        return Ok((0.0, 0.0));
    }
    let indices: Vec<usize> = (0..ds.len()).collect();
    let mut loss_sum = 0.0f64;
    let mut hits = 0.0f64;
    for chunk in indices.chunks(batch_size.max(1)) {
        let (batch, labels) = ds.batch(chunk);
        let logits = net.forward(&batch)?;
        let (loss, _) = cross_entropy(&logits, &labels)?;
        loss_sum += loss * chunk.len() as f64;
        hits += accuracy(&logits, &labels) * chunk.len() as f64;
    }
    Ok((loss_sum / ds.len() as f64, hits / ds.len() as f64))
}
