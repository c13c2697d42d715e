//! Model reconfiguration: physically remove masked channels.
//!
//! Unlike mask-only simulation, the rebuilt network has genuinely smaller
//! dense tensors: pruned output channels disappear from their layer and the
//! matching input slices disappear from every consumer downstream.

use crate::error::{Error, Result};
use crate::nn::layer::LayerSpec;
use crate::nn::network::{Layer, Network};
use crate::pruning::mask::ChannelMask;
use crate::tensor::Tensor;

/// Rebuild the network with masked channels removed.
///
/// For an all-true mask the result is structurally identical to the input;
/// otherwise the parameter count strictly decreases.
pub fn apply_speedup(net: &Network<f32>, mask: &ChannelMask) -> Result<Network<f32>> {
    // Keep-vector over the channel (or flat) axis of the running activation;
    // None means the axis is untouched.
    let mut in_keep: Option<Vec<bool>> = None;
    let mut layers: Vec<Layer<f32>> = Vec::with_capacity(net.layers().len());

    for (i, layer) in net.layers().iter().enumerate() {
        match &layer.spec {
            LayerSpec::Conv2d { in_channels, out_channels, kernel, stride, padding, bias } => {
                let out_keep = expect_mask(mask, i, *out_channels)?;
                let weight = layer.weight.as_ref().expect("conv weight");
                let new_weight =
                    slice4(weight, out_keep, in_keep.as_deref(), *in_channels, *kernel)?;
                let new_bias = layer.bias.as_ref().map(|b| slice1(b, out_keep));
                let new_in = in_keep.as_deref().map_or(*in_channels, count_true);
                let new_out = count_true(out_keep);
                layers.push(Layer {
                    spec: LayerSpec::Conv2d {
                        in_channels: new_in,
                        out_channels: new_out,
                        kernel: *kernel,
                        stride: *stride,
                        padding: *padding,
                        bias: *bias,
                    },
                    weight: Some(new_weight),
                    bias: new_bias,
                });
                in_keep = Some(out_keep.to_vec());
            }
            LayerSpec::Dense { in_features, out_features, bias } => {
                let out_keep = expect_mask(mask, i, *out_features)?;
                let weight = layer.weight.as_ref().expect("dense weight");
                let new_weight = slice2(weight, out_keep, in_keep.as_deref(), *in_features)?;
                let new_bias = layer.bias.as_ref().map(|b| slice1(b, out_keep));
                let new_in = in_keep.as_deref().map_or(*in_features, count_true);
                layers.push(Layer {
                    spec: LayerSpec::Dense {
                        in_features: new_in,
                        out_features: count_true(out_keep),
                        bias: *bias,
                    },
                    weight: Some(new_weight),
                    bias: new_bias,
                });
                in_keep = Some(out_keep.to_vec());
            }
            LayerSpec::Flatten => {
                // Expand a channel keep-vector into per-element keeps over
                // the flattened axis.
                if let Some(keep) = &in_keep {
                    let pre_shape = if i == 0 {
                        net.input_shape().to_vec()
                    } else {
                        net.layer_output_shape(i - 1).to_vec()
                    };
                    let block: usize = pre_shape[1..].iter().product();
                    if keep.len() != pre_shape[0] {
                        return Err(Error::ShapeMismatch {
                            layer: i,
                            detail: format!(
                                "keep vector of {} channels cannot flatten a {pre_shape:?} \
                                 activation",
                                keep.len()
                            ),
                        });
                    }
                    in_keep = Some(
                        keep.iter().flat_map(|&k| std::iter::repeat_n(k, block)).collect(),
                    );
                }
                layers.push(layer.clone());
            }
            // Group construction guarantees both add operands carry the
            // same keep-vector; the layer spec is unchanged.
            LayerSpec::ResidualAdd { source } => {
                layers.push(Layer {
                    spec: LayerSpec::ResidualAdd { source: *source },
                    weight: None,
                    bias: None,
                });
            }
            // Channel-preserving layers pass the keep-vector through
            // untouched (GAP collapses spatial dims, keeping channels).
            LayerSpec::Relu | LayerSpec::MaxPool2d { .. } | LayerSpec::GlobalAvgPool => {
                layers.push(layer.clone());
            }
        }
    }
    Network::from_parts(net.input_shape().to_vec(), layers)
}

fn expect_mask(mask: &ChannelMask, layer: usize, channels: usize) -> Result<&[bool]> {
    let keep = mask.keep(layer).ok_or_else(|| {
        Error::InvalidArgument(format!("mask has no entry for prunable layer {layer}"))
    })?;
    if keep.len() != channels {
        return Err(Error::InvalidArgument(format!(
            "mask for layer {layer} has {} entries, layer has {channels} channels",
            keep.len()
        )));
    }
    if count_true(keep) == 0 {
        return Err(Error::InvalidArgument(format!("mask for layer {layer} keeps no channels")));
    }
    Ok(keep)
}

fn count_true(keep: &[bool]) -> usize {
    keep.iter().filter(|&&k| k).count()
}

fn slice1(t: &Tensor<f32>, keep: &[bool]) -> Tensor<f32> {
    let data: Vec<f32> =
        t.data().iter().zip(keep).filter(|(_, &k)| k).map(|(&v, _)| v).collect();
    Tensor::new(vec![data.len()], data).expect("sliced vector is consistent")
}

fn slice2(
    t: &Tensor<f32>,
    row_keep: &[bool],
    col_keep: Option<&[bool]>,
    cols: usize,
) -> Result<Tensor<f32>> {
    if let Some(ck) = col_keep {
        if ck.len() != cols {
            return Err(Error::InvalidArgument(format!(
                "input keep vector has {} entries, layer expects {cols} inputs",
                ck.len()
            )));
        }
    }
    let new_cols = col_keep.map_or(cols, count_true);
    let mut data = Vec::with_capacity(count_true(row_keep) * new_cols);
    for (r, &rk) in row_keep.iter().enumerate() {
        if !rk {
            continue;
        }
        let row = &t.data()[r * cols..(r + 1) * cols];
        match col_keep {
            Some(ck) => data.extend(row.iter().zip(ck).filter(|(_, &k)| k).map(|(&v, _)| v)),
            None => data.extend_from_slice(row),
        }
    }
    Tensor::new(vec![count_true(row_keep), new_cols], data)
}

fn slice4(
    t: &Tensor<f32>,
    out_keep: &[bool],
    in_keep: Option<&[bool]>,
    in_channels: usize,
    kernel: usize,
) -> Result<Tensor<f32>> {
    if let Some(ik) = in_keep {
        if ik.len() != in_channels {
            return Err(Error::InvalidArgument(format!(
                "input keep vector has {} entries, conv expects {in_channels} channels",
                ik.len()
            )));
        }
    }
    let k2 = kernel * kernel;
    let new_in = in_keep.map_or(in_channels, count_true);
    let mut data = Vec::with_capacity(count_true(out_keep) * new_in * k2);
    for (o, &ok) in out_keep.iter().enumerate() {
        if !ok {
            continue;
        }
        for ci in 0..in_channels {
            if let Some(ik) = in_keep {
                if !ik[ci] {
                    continue;
                }
            }
            let base = (o * in_channels + ci) * k2;
            data.extend_from_slice(&t.data()[base..base + k2]);
        }
    }
    Tensor::new(vec![count_true(out_keep), new_in, kernel, kernel], data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::count::count_params;
    use crate::nn::network::NetworkBuilder;
    use crate::pruning::groups::dependency_groups;
    use crate::pruning::mask::generate_mask;
    use crate::pruning::score::layer_scores;
    use crate::rng::seeded;
    use crate::tensor::Tensor;
    use rand::Rng;

    fn small_cnn() -> Network<f32> {
        NetworkBuilder::new(&[2, 6, 6])
            .conv2d(6, 3, 1, 1, true)
            .relu()
            .maxpool2d(2, 2)
            .conv2d(8, 3, 1, 1, true)
            .relu()
            .flatten()
            .dense(10, true)
            .relu()
            .dense(4, true)
            .build_seeded(77)
            .unwrap()
    }

    fn mask_at(net: &Network<f32>, ratio: f64) -> ChannelMask {
        let groups = dependency_groups(net).unwrap();
        let scores = layer_scores(net);
        generate_mask(net, ratio, &groups, &scores).unwrap()
    }

    #[test]
    fn all_true_mask_is_identity() {
        let net = small_cnn();
        let pruned = apply_speedup(&net, &mask_at(&net, 0.0)).unwrap();
        assert_eq!(net, pruned);
        let x = Tensor::filled(vec![2, 2, 6, 6], 0.3f32);
        assert_eq!(net.forward(&x).unwrap(), pruned.forward(&x).unwrap());
    }

    #[test]
    fn param_count_strictly_decreases() {
        let net = small_cnn();
        let pruned = apply_speedup(&net, &mask_at(&net, 0.5)).unwrap();
        assert!(count_params(&pruned) < count_params(&net));
    }

    #[test]
    fn monotone_in_ratio() {
        let net = small_cnn();
        let mut last = u64::MAX;
        for ratio in [0.0, 0.2, 0.4, 0.6, 0.8] {
            let p = count_params(&apply_speedup(&net, &mask_at(&net, ratio)).unwrap());
            assert!(p <= last, "params increased at ratio {ratio}");
            last = p;
        }
    }

    #[test]
    fn pruned_network_matches_zero_masked_original() {
        // Oracle: zero the incoming weights and bias of dropped channels in
        // the original network; outputs must agree with the rebuilt model.
        let net = small_cnn();
        let mask = mask_at(&net, 0.5);
        let pruned = apply_speedup(&net, &mask).unwrap();

        let mut masked = net.clone();
        for (li, layer) in net.layers().iter().enumerate() {
            let Some(keep) = mask.keep(li) else { continue };
            // Flat parameter order interleaves weight and bias per layer.
            let flat: usize = net.layers()[..li]
                .iter()
                .map(|l| l.weight.is_some() as usize + l.bias.is_some() as usize)
                .sum();
            let channels = keep.len();
            {
                let mut ps = masked.params_mut();
                let w = &mut ps[flat];
                let per = w.numel() / channels;
                for (c, &k) in keep.iter().enumerate() {
                    if !k {
                        for v in &mut w.data_mut()[c * per..(c + 1) * per] {
                            *v = 0.0;
                        }
                    }
                }
            }
            if layer.bias.is_some() {
                let mut ps = masked.params_mut();
                let b = &mut ps[flat + 1];
                for (c, &k) in keep.iter().enumerate() {
                    if !k {
                        b.data_mut()[c] = 0.0;
                    }
                }
            }
        }

        let mut rng = seeded(5);
        for _ in 0..20 {
            let data: Vec<f32> = (0..2 * 2 * 6 * 6).map(|_| rng.random::<f32>() * 2.0 - 1.0).collect();
            let x = Tensor::new(vec![2, 2, 6, 6], data).unwrap();
            let diff = pruned
                .forward(&x)
                .unwrap()
                .max_abs_diff(&masked.forward(&x).unwrap());
            assert!(diff < 1e-5, "outputs diverge by {diff}");
        }
    }

    #[test]
    fn residual_network_survives_speedup() {
        let net = NetworkBuilder::new(&[3, 8, 8])
            .conv2d(6, 3, 1, 1, true) // 0
            .relu()
            .conv2d(6, 3, 1, 1, true) // 2
            .relu()
            .conv2d(6, 3, 1, 1, true) // 4
            .residual_add(1)
            .relu()
            .global_avg_pool()
            .dense(4, true)
            .build_seeded(3)
            .unwrap();
        let pruned = apply_speedup(&net, &mask_at(&net, 0.5)).unwrap();
        // Dependency groups keep the add shape-compatible; forward works.
        let x = Tensor::filled(vec![1, 3, 8, 8], 0.1f32);
        assert_eq!(pruned.forward(&x).unwrap().shape(), &[1, 4]);
        assert!(count_params(&pruned) < count_params(&net));
    }

    #[test]
    fn wrong_mask_shape_is_rejected() {
        let a = small_cnn();
        let b = NetworkBuilder::new(&[2, 6, 6])
            .conv2d(5, 3, 1, 1, true)
            .global_avg_pool()
            .dense(4, true)
            .build_seeded(0)
            .unwrap();
        let mask_for_b = mask_at(&b, 0.4);
        assert!(apply_speedup(&a, &mask_for_b).is_err());
    }
}
