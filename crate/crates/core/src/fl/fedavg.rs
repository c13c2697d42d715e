//! Parameter averaging and the global objective.

use crate::error::{Error, Result};
use crate::fl::train::evaluate;
use crate::fl::ClientState;
use crate::nn::network::Network;

/// Shard-size-weighted parameter mean. All models must share one
/// architecture; a mismatch is the documented failure mode of parameter
/// averaging over heterogeneous clients.
pub fn fedavg_aggregate(models: &[&Network<f32>], shard_sizes: &[u64]) -> Result<Network<f32>> {
    let first = *models
        .first()
        .ok_or_else(|| Error::InvalidArgument("no models to aggregate".into()))?;
    if models.len() != shard_sizes.len() {
        return Err(Error::InvalidArgument(format!(
            "{} models vs {} shard sizes",
            models.len(),
            shard_sizes.len()
        )));
    }
    for (c, model) in models.iter().enumerate() {
        check_same_architecture(first, model, c)?;
    }
    let total: u64 = shard_sizes.iter().sum();
    if total == 0 {
        return Err(Error::InvalidArgument("all shards are empty".into()));
    }

    let mut result = first.clone();
    let param_count = result.params().len();
    for p in 0..param_count {
        let len = result.params()[p].numel();
        let mut acc = vec![0.0f64; len];
        for (model, &k_c) in models.iter().zip(shard_sizes) {
            let weight = k_c as f64 / total as f64;
            for (a, v) in acc.iter_mut().zip(model.params()[p].data()) {
                *a += weight * *v as f64;
            }
        }
        let mut params = result.params_mut();
        for (dst, a) in params[p].data_mut().iter_mut().zip(acc) {
            *dst = a as f32;
        }
    }
    Ok(result)
}

fn check_same_architecture(a: &Network<f32>, b: &Network<f32>, client: usize) -> Result<()> {
    if a.input_shape() != b.input_shape() || a.layers().len() != b.layers().len() {
        return Err(Error::ArchitectureMismatch(format!(
            "parameter averaging needs identical architectures; client {client} has \
             {} layers over input {:?}, expected {} over {:?}",
            b.layers().len(),
            b.input_shape(),
            a.layers().len(),
            a.input_shape()
        )));
    }
    for (i, (la, lb)) in a.layers().iter().zip(b.layers()).enumerate() {
        if la.spec != lb.spec {
            return Err(Error::ArchitectureMismatch(format!(
                "parameter averaging needs identical architectures; client {client} \
                 differs at layer {i}: {:?} vs {:?}",
                lb.spec, la.spec
            )));
        }
    }
    Ok(())
}

/// Global objective: the shard-size-weighted mean of each client's mean
/// loss under its current model.
pub fn global_loss(clients: &[ClientState]) -> Result<f64> {
    if clients.is_empty() {
        return Err(Error::InvalidArgument("no clients".into()));
    }
    let total: u64 = clients.iter().map(ClientState::shard_size).sum();
    if total == 0 {
        return Err(Error::InvalidArgument("all shards are empty".into()));
    }
    let mut acc = 0.0f64;
    for client in clients {
        let (loss, _) = evaluate(&client.model, &client.data, 256)?;
        acc += client.shard_size() as f64 / total as f64 * loss;
    }
    Ok(acc)
}
