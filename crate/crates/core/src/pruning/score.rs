//! L1 channel importance.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::nn::layer::LayerSpec;
use crate::nn::network::{Layer, Network};

/// Per-layer channel scores, keyed by layer index.
pub type LayerScores = BTreeMap<usize, Vec<f64>>;

/// L1 importance of each output channel (conv) or unit (dense): the sum of
/// absolute weights feeding it. Biases are excluded from the score; the bias
/// of a removed channel is dropped together with it.
pub fn channel_l1_scores(layer: &Layer<f32>) -> Result<Vec<f64>> {
    let weight = match (&layer.spec, &layer.weight) {
        (LayerSpec::Conv2d { .. } | LayerSpec::Dense { .. }, Some(w)) => w,
        _ => {
            return Err(Error::InvalidArgument(format!(
                "channel scores are defined for conv2d/dense layers, not {}",
                layer.spec.kind()
            )))
        }
    };
    let channels = weight.shape()[0];
    let per_channel = weight.numel() / channels;
    let data = weight.data();
    Ok((0..channels)
        .map(|c| {
            data[c * per_channel..(c + 1) * per_channel]
                .iter()
                .map(|v| v.abs() as f64)
                .sum()
        })
        .collect())
}

/// Scores for every prunable layer in the network.
pub fn layer_scores(net: &Network<f32>) -> LayerScores {
    net.layers()
        .iter()
        .enumerate()
        .filter(|(_, l)| l.spec.is_prunable())
        .map(|(i, l)| (i, channel_l1_scores(l).expect("prunable layer has weights")))
        .collect()
}
