//! Mask generation.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::nn::network::Network;
use crate::pruning::groups::DependencyGroup;
use crate::pruning::score::LayerScores;

/// Boolean keep-vector per prunable layer, keyed by layer index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChannelMask {
    keep: BTreeMap<usize, Vec<bool>>,
}

impl ChannelMask {
    pub fn keep(&self, layer: usize) -> Option<&[bool]> {
        self.keep.get(&layer).map(Vec::as_slice)
    }

    pub fn layers(&self) -> impl Iterator<Item = (usize, &[bool])> {
        self.keep.iter().map(|(&i, v)| (i, v.as_slice()))
    }

    pub fn kept_channels(&self, layer: usize) -> usize {
        self.keep.get(&layer).map_or(0, |v| v.iter().filter(|&&k| k).count())
    }

    pub fn is_all_true(&self) -> bool {
        self.keep.values().all(|v| v.iter().all(|&k| k))
    }
}

/// Number of channels kept out of `total` at a pruning ratio.
///
/// ceil((1 - ratio) * total), clamped to at least one channel. The product
/// is snapped to the nearest integer within 1e-9 first so that exact
/// fractions like 0.6 * 10 do not round up through float error.
pub fn keep_count(ratio: f64, total: usize) -> usize {
    let x = (1.0 - ratio) * total as f64;
    let snapped = x.round();
    let x = if (x - snapped).abs() < 1e-9 { snapped } else { x };
    (x.ceil() as usize).clamp(1, total)
}

/// Build the keep-mask for one pruning ratio.
///
/// Channels are ranked per dependency group by the sum of member layers'
/// scores; ties break toward the lower channel index. The final prunable
/// layer (the classifier output) and any input-locked group keep everything.
pub fn generate_mask(
    net: &Network<f32>,
    ratio: f64,
    groups: &[DependencyGroup],
    scores: &LayerScores,
) -> Result<ChannelMask> {
    if !(0.0..1.0).contains(&ratio) {
        return Err(Error::InvalidArgument(format!("pruning ratio {ratio} outside [0,1)")));
    }
    let classifier = net
        .layers()
        .iter()
        .enumerate()
        .rev()
        .find(|(_, l)| l.spec.is_prunable())
        .map(|(i, _)| i);

    let mut keep: BTreeMap<usize, Vec<bool>> = BTreeMap::new();
    for group in groups {
        let channels = group
            .layers
            .iter()
            .map(|&i| net.layers()[i].spec.out_channels().expect("prunable member"))
            .max()
            .ok_or_else(|| Error::InvalidArgument("empty dependency group".into()))?;

        let full = group.locked || classifier.is_some_and(|c| group.layers.contains(&c));
        let mask = if full {
            vec![true; channels]
        } else {
            let mut combined = vec![0.0f64; channels];
            for &layer in &group.layers {
                let s = scores.get(&layer).ok_or_else(|| {
                    Error::InvalidArgument(format!("missing scores for layer {layer}"))
                })?;
                if s.len() != channels {
                    return Err(Error::InvalidArgument(format!(
                        "scores for layer {layer} have {} entries, expected {channels}",
                        s.len()
                    )));
                }
                for (c, v) in combined.iter_mut().zip(s) {
                    *c += v;
                }
            }
            let mut order: Vec<usize> = (0..channels).collect();
            order.sort_by(|&a, &b| {
                combined[b].total_cmp(&combined[a]).then(a.cmp(&b))
            });
            let mut mask = vec![false; channels];
            for &c in order.iter().take(keep_count(ratio, channels)) {
                mask[c] = true;
            }
            mask
        };
        for &layer in &group.layers {
            keep.insert(layer, mask.clone());
        }
    }
    Ok(ChannelMask { keep })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::network::NetworkBuilder;
    use crate::pruning::groups::dependency_groups;
    use crate::pruning::score::layer_scores;
    use crate::tensor::Tensor;

    fn two_layer_net(hidden_weights: Vec<f32>) -> Network<f32> {
        let mut net = NetworkBuilder::new(&[2])
            .dense(2, false)
            .dense(3, false)
            .build_seeded(0)
            .unwrap();
        *net.params_mut()[0] = Tensor::new(vec![2, 2], hidden_weights).unwrap();
        net
    }

    #[test]
    fn ratio_zero_keeps_everything() {
        let net = two_layer_net(vec![1.0, -1.0, 2.0, 2.0]);
        let groups = dependency_groups(&net).unwrap();
        let scores = layer_scores(&net);
        let mask = generate_mask(&net, 0.0, &groups, &scores).unwrap();
        assert!(mask.is_all_true());
    }

    #[test]
    fn half_ratio_keeps_the_higher_scored_channel() {
        // Hidden-layer scores [2, 4]: channel 1 survives.
        let net = two_layer_net(vec![1.0, -1.0, 2.0, 2.0]);
        let groups = dependency_groups(&net).unwrap();
        let scores = layer_scores(&net);
        let mask = generate_mask(&net, 0.5, &groups, &scores).unwrap();
        assert_eq!(mask.keep(0).unwrap(), &[false, true]);
    }

    #[test]
    fn extreme_ratio_keeps_exactly_the_best_channel() {
        let mut net = NetworkBuilder::new(&[4])
            .dense(10, false)
            .dense(2, false)
            .build_seeded(3)
            .unwrap();
        // Make channel 6 the clear winner.
        {
            let w = net.params_mut().swap_remove(0);
            for (i, v) in w.data_mut().iter_mut().enumerate() {
                *v = if i / 4 == 6 { 5.0 } else { 0.01 };
            }
        }
        let groups = dependency_groups(&net).unwrap();
        let scores = layer_scores(&net);
        let mask = generate_mask(&net, 0.9, &groups, &scores).unwrap();
        assert_eq!(mask.kept_channels(0), 1);
        assert!(mask.keep(0).unwrap()[6]);
    }

    #[test]
    fn ties_break_toward_lower_channel_index() {
        let net = two_layer_net(vec![1.0, 1.0, -1.0, -1.0]); // scores [2, 2]
        let groups = dependency_groups(&net).unwrap();
        let scores = layer_scores(&net);
        let mask = generate_mask(&net, 0.5, &groups, &scores).unwrap();
        assert_eq!(mask.keep(0).unwrap(), &[true, false]);
    }

    #[test]
    fn classifier_layer_is_never_pruned() {
        let net = two_layer_net(vec![1.0, -1.0, 2.0, 2.0]);
        let groups = dependency_groups(&net).unwrap();
        let scores = layer_scores(&net);
        let mask = generate_mask(&net, 0.9, &groups, &scores).unwrap();
        assert_eq!(mask.keep(1).unwrap(), &[true, true, true]);
    }

    #[test]
    fn keep_count_handles_exact_fractions() {
        assert_eq!(keep_count(0.6, 10), 4);
        assert_eq!(keep_count(0.9, 10), 1);
        assert_eq!(keep_count(0.9, 64), 7); // ceil(6.4)
        assert_eq!(keep_count(0.0, 5), 5);
        assert_eq!(keep_count(0.999, 10), 1); // clamp to >= 1
    }

    #[test]
    fn ratio_out_of_range_is_rejected() {
        let net = two_layer_net(vec![0.0; 4]);
        let groups = dependency_groups(&net).unwrap();
        let scores = layer_scores(&net);
        assert!(generate_mask(&net, 1.0, &groups, &scores).is_err());
        assert!(generate_mask(&net, -0.1, &groups, &scores).is_err());
    }
}
