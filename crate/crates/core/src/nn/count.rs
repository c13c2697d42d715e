//! Parameter and FLOP counters.
//!
//! FLOPs follow the 1 MAC = 1 FLOP convention (one multiply-accumulate
//! counts once); activation, pooling, and residual additions count one FLOP
//! per output element. Reports that need the multiply-and-add-separately
//! convention can simply double the conv/dense terms, which dominate.

use crate::error::Result;
use crate::nn::layer::LayerSpec;
use crate::nn::network::Network;
use crate::tensor::Scalar;

/// Exact count of trainable scalars.
pub fn count_params<S: Scalar>(net: &Network<S>) -> u64 {
    net.params().iter().map(|p| p.numel() as u64).sum()
}

/// Forward-pass FLOPs for one sample at the network's own input shape.
pub fn count_flops<S: Scalar>(net: &Network<S>) -> u64 {
    count_flops_for(net, net.input_shape()).expect("network input shape is valid by construction")
}

/// Forward-pass FLOPs for one sample at an arbitrary input shape.
pub fn count_flops_for<S: Scalar>(net: &Network<S>, input_shape: &[usize]) -> Result<u64> {
    let mut shape = input_shape.to_vec();
    let mut shapes: Vec<Vec<usize>> = Vec::with_capacity(net.layers().len());
    let mut total = 0u64;
    for (i, layer) in net.layers().iter().enumerate() {
        let out = layer.spec.output_shape(i, &shape)?;
        let out_elems: u64 = out.iter().product::<usize>() as u64;
        total += match layer.spec {
            LayerSpec::Conv2d { in_channels, kernel, bias, .. } => {
                let macs = out_elems * (in_channels * kernel * kernel) as u64;
                macs + if bias { out_elems } else { 0 }
            }
            LayerSpec::Dense { in_features, bias, .. } => {
                let macs = out_elems * in_features as u64;
                macs + if bias { out_elems } else { 0 }
            }
            LayerSpec::Relu
            | LayerSpec::MaxPool2d { .. }
            | LayerSpec::GlobalAvgPool
            | LayerSpec::ResidualAdd { .. } => out_elems,
            LayerSpec::Flatten => 0,
        };
        shapes.push(out.clone());
        shape = out;
    }
    Ok(total)
}
