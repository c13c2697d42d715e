//! Layer descriptions and per-layer shape inference.

use crate::error::{Error, Result};

/// Architecture description of a single layer.
///
/// Channel and feature counts are stored explicitly so that a layer spec is
/// self-contained; the network builder resolves them from the running
/// activation shape.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LayerSpec {
    Conv2d {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        bias: bool,
    },
    Dense {
        in_features: usize,
        out_features: usize,
        bias: bool,
    },
    Relu,
    MaxPool2d {
        kernel: usize,
        stride: usize,
    },
    GlobalAvgPool,
    Flatten,
    /// Adds the output of an earlier layer (by index) to the current
    /// activation. Both operands must have identical shapes.
    ResidualAdd {
        source: usize,
    },
}

impl LayerSpec {
    /// Short lowercase tag used in checkpoint headers and error messages.
    pub fn kind(&self) -> &'static str {
        match self {
            LayerSpec::Conv2d { .. } => "conv2d",
            LayerSpec::Dense { .. } => "dense",
            LayerSpec::Relu => "relu",
            LayerSpec::MaxPool2d { .. } => "maxpool2d",
            LayerSpec::GlobalAvgPool => "global-avg-pool",
            LayerSpec::Flatten => "flatten",
            LayerSpec::ResidualAdd { .. } => "residual-add",
        }
    }

    /// Layers that own a prunable weight tensor (conv and dense).
    pub fn is_prunable(&self) -> bool {
        matches!(self, LayerSpec::Conv2d { .. } | LayerSpec::Dense { .. })
    }

    /// Output channels / units for prunable layers.
    pub fn out_channels(&self) -> Option<usize> {
        match *self {
            LayerSpec::Conv2d { out_channels, .. } => Some(out_channels),
            LayerSpec::Dense { out_features, .. } => Some(out_features),
            _ => None,
        }
    }

    /// Check hyperparameter invariants that do not depend on the
    /// surrounding network.
    pub fn validate(&self, layer: usize) -> Result<()> {
        let fail = |detail: String| Err(Error::InvalidNetwork(format!("layer {layer}: {detail}")));
        match *self {
            LayerSpec::Conv2d { in_channels, out_channels, kernel, stride, padding, .. } => {
                if in_channels == 0 || out_channels == 0 || kernel == 0 || stride == 0 {
                    return fail(format!(
                        "conv2d hyperparameters must be positive \
                         (in={in_channels}, out={out_channels}, kernel={kernel}, stride={stride})"
                    ));
                }
                if padding >= kernel {
                    return fail(format!("conv2d padding {padding} must be < kernel {kernel}"));
                }
            }
            LayerSpec::Dense { in_features, out_features, .. } => {
                if in_features == 0 || out_features == 0 {
                    return fail(format!(
                        "dense dims must be positive (in={in_features}, out={out_features})"
                    ));
                }
            }
            LayerSpec::MaxPool2d { kernel, stride } => {
                if kernel == 0 || stride == 0 {
                    return fail(format!(
                        "maxpool2d hyperparameters must be positive (kernel={kernel}, stride={stride})"
                    ));
                }
            }
            LayerSpec::ResidualAdd { source } => {
                if source >= layer {
                    return fail(format!(
                        "residual-add source {source} must reference an earlier layer"
                    ));
                }
            }
            LayerSpec::Relu | LayerSpec::GlobalAvgPool | LayerSpec::Flatten => {}
        }
        Ok(())
    }

    /// Per-sample output shape given the per-sample input shape.
    ///
    /// `ResidualAdd` is shape-preserving and checked against its source at
    /// the network level, where the source shape is known.
    pub fn output_shape(&self, layer: usize, input: &[usize]) -> Result<Vec<usize>> {
        let mismatch = |detail: String| Err(Error::ShapeMismatch { layer, detail });
        match *self {
            LayerSpec::Conv2d { in_channels, out_channels, kernel, stride, padding, .. } => {
                let [c, h, w] = spatial3(input)
                    .ok_or_else(|| shape_err(layer, "conv2d expects [C,H,W] input", input))?;
                if c != in_channels {
                    return mismatch(format!(
                        "conv2d expects {in_channels} input channels, activation has {c}"
                    ));
                }
                let oh = conv_extent(h, kernel, stride, padding);
                let ow = conv_extent(w, kernel, stride, padding);
                match (oh, ow) {
                    (Some(oh), Some(ow)) => Ok(vec![out_channels, oh, ow]),
                    _ => mismatch(format!(
                        "conv2d kernel {kernel} (stride {stride}, padding {padding}) \
                         does not fit a {h}x{w} input"
                    )),
                }
            }
            LayerSpec::Dense { in_features, out_features, .. } => {
                if input.len() != 1 || input[0] != in_features {
                    return mismatch(format!(
                        "dense expects flat [{in_features}] input, activation is {input:?}"
                    ));
                }
                Ok(vec![out_features])
            }
            LayerSpec::Relu => Ok(input.to_vec()),
            LayerSpec::MaxPool2d { kernel, stride } => {
                let [c, h, w] = spatial3(input)
                    .ok_or_else(|| shape_err(layer, "maxpool2d expects [C,H,W] input", input))?;
                let oh = pool_extent(h, kernel, stride);
                let ow = pool_extent(w, kernel, stride);
                match (oh, ow) {
                    (Some(oh), Some(ow)) => Ok(vec![c, oh, ow]),
                    _ => mismatch(format!(
                        "maxpool2d kernel {kernel} (stride {stride}) does not fit a {h}x{w} input"
                    )),
                }
            }
            LayerSpec::GlobalAvgPool => {
                let [c, _, _] = spatial3(input)
                    .ok_or_else(|| shape_err(layer, "global-avg-pool expects [C,H,W] input", input))?;
                Ok(vec![c])
            }
            LayerSpec::Flatten => Ok(vec![input.iter().product()]),
            LayerSpec::ResidualAdd { .. } => Ok(input.to_vec()),
        }
    }
}

fn shape_err(layer: usize, what: &str, input: &[usize]) -> Error {
    Error::ShapeMismatch { layer, detail: format!("{what}, got {input:?}") }
}

fn spatial3(shape: &[usize]) -> Option<[usize; 3]> {
    match shape {
        [c, h, w] => Some([*c, *h, *w]),
        _ => None,
    }
}

fn conv_extent(input: usize, kernel: usize, stride: usize, padding: usize) -> Option<usize> {
    let padded = input + 2 * padding;
    if padded < kernel {
        return None;
    }
    Some((padded - kernel) / stride + 1)
}

fn pool_extent(input: usize, kernel: usize, stride: usize) -> Option<usize> {
    if input < kernel {
        return None;
    }
    Some((input - kernel) / stride + 1)
}
