//! Network container, forward pass, and backpropagation.

use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::nn::init::kaiming_uniform;
use crate::nn::layer::LayerSpec;
use crate::rng::seeded;
use crate::tensor::{Scalar, Tensor};

/// A layer spec together with its parameters (if any).
#[derive(Debug, Clone, PartialEq)]
pub struct Layer<S: Scalar = f32> {
    pub spec: LayerSpec,
    pub weight: Option<Tensor<S>>,
    pub bias: Option<Tensor<S>>,
}

/// An ordered stack of layers over a fixed per-sample input shape.
///
/// Skip connections are expressed by `ResidualAdd` layers referencing an
/// earlier layer's output, so the activation graph is a DAG while the layer
/// storage stays a flat list.
#[derive(Debug, Clone, PartialEq)]
pub struct Network<S: Scalar = f32> {
    input_shape: Vec<usize>,
    layers: Vec<Layer<S>>,
    /// Per-sample output shape of every layer, precomputed at construction.
    shapes: Vec<Vec<usize>>,
}

/// Parameter gradients aligned with the network's layer list.
#[derive(Debug, Clone)]
pub struct Gradients<S: Scalar = f32> {
    pub layers: Vec<LayerGrads<S>>,
}

#[derive(Debug, Clone)]
pub struct LayerGrads<S: Scalar = f32> {
    pub weight: Option<Tensor<S>>,
    pub bias: Option<Tensor<S>>,
}

impl<S: Scalar> Default for LayerGrads<S> {
    fn default() -> Self {
        Self { weight: None, bias: None }
    }
}

/// Cached activations from a forward pass, consumed by [`Network::backward`].
pub struct ForwardPass<S: Scalar = f32> {
    pub logits: Tensor<S>,
    input: Tensor<S>,
    /// `acts[i]` is the batch output of layer `i`.
    acts: Vec<Tensor<S>>,
    /// Flat argmax input index per output element, for each maxpool layer.
    pool_argmax: Vec<Option<Vec<u32>>>,
}

impl<S: Scalar> Network<S> {
    /// Assemble and validate a network from finished parts. Checks layer
    /// invariants, shape compatibility along the chain, residual source
    /// shapes, and parameter tensor shapes.
    pub fn from_parts(input_shape: Vec<usize>, layers: Vec<Layer<S>>) -> Result<Self> {
        if input_shape.is_empty() || input_shape.contains(&0) {
            return Err(Error::InvalidNetwork(format!("bad input shape {input_shape:?}")));
        }
        let mut shapes: Vec<Vec<usize>> = Vec::with_capacity(layers.len());
        for (i, layer) in layers.iter().enumerate() {
            layer.spec.validate(i)?;
            let input = if i == 0 { &input_shape } else { &shapes[i - 1] };
            let out = layer.spec.output_shape(i, input)?;
            if let LayerSpec::ResidualAdd { source } = layer.spec {
                if shapes[source] != *input {
                    return Err(Error::ShapeMismatch {
                        layer: i,
                        detail: format!(
                            "residual-add operands differ: source layer {source} yields {:?}, \
                             current activation is {:?}",
                            shapes[source], input
                        ),
                    });
                }
            }
            check_params(i, layer)?;
            shapes.push(out);
        }
        Ok(Self { input_shape, layers, shapes })
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn layers(&self) -> &[Layer<S>] {
        &self.layers
    }

    /// Per-sample output shape of layer `i`.
    pub fn layer_output_shape(&self, i: usize) -> &[usize] {
        &self.shapes[i]
    }

    /// Per-sample shape of the network output.
    pub fn output_shape(&self) -> &[usize] {
        self.shapes.last().map(Vec::as_slice).unwrap_or(&self.input_shape)
    }

    /// Flat views of every trainable tensor, in declaration order
    /// (weight before bias within a layer).
    pub fn params(&self) -> Vec<&Tensor<S>> {
        self.layers
            .iter()
            .flat_map(|l| [l.weight.as_ref(), l.bias.as_ref()])
            .flatten()
            .collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor<S>> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weight.as_mut(), l.bias.as_mut()])
            .flatten()
            .collect()
    }

    /// Run the batch through the network and return logits only.
    pub fn forward(&self, batch: &Tensor<S>) -> Result<Tensor<S>> {
        Ok(self.forward_with_trace(batch)?.logits)
    }

    /// Run the batch and keep the activations needed by [`Self::backward`].
    pub fn forward_with_trace(&self, batch: &Tensor<S>) -> Result<ForwardPass<S>> {
        let per_sample = batch.shape().get(1..).unwrap_or(&[]);
        if batch.shape().is_empty() || per_sample != self.input_shape.as_slice() {
            return Err(Error::ShapeMismatch {
                layer: 0,
                detail: format!(
                    "batch shape {:?} does not match network input {:?} (leading batch axis expected)",
                    batch.shape(),
                    self.input_shape
                ),
            });
        }
        let n = batch.shape()[0];
        let mut acts: Vec<Tensor<S>> = Vec::with_capacity(self.layers.len());
        let mut pool_argmax: Vec<Option<Vec<u32>>> = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            let input = if i == 0 { batch } else { &acts[i - 1] };
            let mut argmax = None;
            let out = match &layer.spec {
                LayerSpec::Conv2d { .. } => conv2d_forward(layer, input, n),
                LayerSpec::Dense { .. } => dense_forward(layer, input, n),
                LayerSpec::Relu => input.map(|v| v.max_val(S::ZERO)),
                LayerSpec::MaxPool2d { kernel, stride } => {
                    let (out, idx) = maxpool_forward(input, *kernel, *stride);
                    argmax = Some(idx);
                    out
                }
                LayerSpec::GlobalAvgPool => gap_forward(input),
                LayerSpec::Flatten => {
                    let flat: usize = input.shape()[1..].iter().product();
                    input.reshaped(vec![n, flat])?
                }
                LayerSpec::ResidualAdd { source } => {
                    let skip = &acts[*source];
                    let mut out = input.clone();
                    for (o, s) in out.data_mut().iter_mut().zip(skip.data()) {
                        *o += *s;
                    }
                    out
                }
            };
            acts.push(out);
            pool_argmax.push(argmax);
        }
        let logits = acts.last().cloned().unwrap_or_else(|| batch.clone());
        Ok(ForwardPass { logits, input: batch.clone(), acts, pool_argmax })
    }

    /// Backpropagate `logits_grad` through the recorded pass, returning
    /// parameter gradients for every trainable tensor.
    ///
    /// The pass must come from `forward_with_trace` on this network with the
    /// same batch; a stale trace is rejected by shape checks.
    pub fn backward(&self, pass: &ForwardPass<S>, logits_grad: &Tensor<S>) -> Result<Gradients<S>> {
        if pass.acts.len() != self.layers.len() {
            return Err(Error::InvalidArgument(
                "forward trace does not belong to this network".into(),
            ));
        }
        if logits_grad.shape() != pass.logits.shape() {
            return Err(Error::ShapeMismatch {
                layer: self.layers.len().saturating_sub(1),
                detail: format!(
                    "logits gradient shape {:?} does not match logits {:?}",
                    logits_grad.shape(),
                    pass.logits.shape()
                ),
            });
        }
        let n = pass.input.shape()[0];
        let num_layers = self.layers.len();
        let mut grads: Vec<LayerGrads<S>> = (0..num_layers).map(|_| LayerGrads::default()).collect();
        // grad_acts[i] = dL/d(activation i), where activation 0 is the batch
        // input and activation i+1 is the output of layer i. Entries start
        // empty and accumulate contributions from every consumer.
        let mut grad_acts: Vec<Option<Tensor<S>>> = vec![None; num_layers + 1];
        grad_acts[num_layers] = Some(logits_grad.clone());

        for i in (0..num_layers).rev() {
            let gout = match grad_acts[i + 1].take() {
                Some(g) => g,
                // Output unused (can only happen for a dead branch; keep zeros).
                None => Tensor::zeros(pass.acts[i].shape().to_vec()),
            };
            let input = if i == 0 { &pass.input } else { &pass.acts[i - 1] };
            let layer = &self.layers[i];
            let gin = match &layer.spec {
                LayerSpec::Conv2d { .. } => {
                    let (gin, gw, gb) = conv2d_backward(layer, input, &gout, n);
                    grads[i] = LayerGrads { weight: Some(gw), bias: gb };
                    gin
                }
                LayerSpec::Dense { .. } => {
                    let (gin, gw, gb) = dense_backward(layer, input, &gout, n);
                    grads[i] = LayerGrads { weight: Some(gw), bias: gb };
                    gin
                }
                LayerSpec::Relu => {
                    let mut gin = gout.clone();
                    for (g, x) in gin.data_mut().iter_mut().zip(input.data()) {
                        if *x <= S::ZERO {
                            *g = S::ZERO;
                        }
                    }
                    gin
                }
                LayerSpec::MaxPool2d { .. } => {
                    let argmax = pass.pool_argmax[i]
                        .as_ref()
                        .expect("maxpool trace entry missing");
                    let mut gin = Tensor::zeros(input.shape().to_vec());
                    for (g, &src) in gout.data().iter().zip(argmax) {
                        gin.data_mut()[src as usize] += *g;
                    }
                    gin
                }
                LayerSpec::GlobalAvgPool => gap_backward(input, &gout),
                LayerSpec::Flatten => gout.reshaped(input.shape().to_vec())?,
                LayerSpec::ResidualAdd { source } => {
                    // d(x + skip)/dx = I and d/dskip = I: route the same
                    // gradient to both operands.
                    accumulate(&mut grad_acts[*source + 1], &gout);
                    gout.clone()
                }
            };
            accumulate(&mut grad_acts[i], &gin);
        }
        Ok(Gradients { layers: grads })
    }
}

impl Network<f32> {
    /// Convert to f64 for finite-difference verification.
    pub fn to_f64(&self) -> Network<f64> {
        Network {
            input_shape: self.input_shape.clone(),
            layers: self
                .layers
                .iter()
                .map(|l| Layer {
                    spec: l.spec.clone(),
                    weight: l.weight.as_ref().map(Tensor::cast),
                    bias: l.bias.as_ref().map(Tensor::cast),
                })
                .collect(),
            shapes: self.shapes.clone(),
        }
    }
}

impl<S: Scalar> Gradients<S> {
    /// Flat list matching [`Network::params`] order.
    pub fn flat(&self) -> Vec<&Tensor<S>> {
        self.layers
            .iter()
            .flat_map(|g| [g.weight.as_ref(), g.bias.as_ref()])
            .flatten()
            .collect()
    }
}

fn accumulate<S: Scalar>(slot: &mut Option<Tensor<S>>, grad: &Tensor<S>) {
    match slot {
        Some(acc) => {
            for (a, g) in acc.data_mut().iter_mut().zip(grad.data()) {
                *a += *g;
            }
        }
        None => *slot = Some(grad.clone()),
    }
}

fn check_params<S: Scalar>(i: usize, layer: &Layer<S>) -> Result<()> {
    let bad = |detail: String| Err(Error::InvalidNetwork(format!("layer {i}: {detail}")));
    match layer.spec {
        LayerSpec::Conv2d { in_channels, out_channels, kernel, bias, .. } => {
            let want = vec![out_channels, in_channels, kernel, kernel];
            match &layer.weight {
                Some(w) if w.shape() == want.as_slice() => {}
                other => {
                    return bad(format!(
                        "conv2d weight shape {:?}, expected {want:?}",
                        other.as_ref().map(|t| t.shape().to_vec())
                    ))
                }
            }
            check_bias(i, layer, bias, out_channels)?;
        }
        LayerSpec::Dense { in_features, out_features, bias } => {
            let want = vec![out_features, in_features];
            match &layer.weight {
                Some(w) if w.shape() == want.as_slice() => {}
                other => {
                    return bad(format!(
                        "dense weight shape {:?}, expected {want:?}",
                        other.as_ref().map(|t| t.shape().to_vec())
                    ))
                }
            }
            check_bias(i, layer, bias, out_features)?;
        }
        _ => {
            if layer.weight.is_some() || layer.bias.is_some() {
                return bad(format!("{} layer must not carry parameters", layer.spec.kind()));
            }
        }
    }
    Ok(())
}

fn check_bias<S: Scalar>(i: usize, layer: &Layer<S>, has_bias: bool, len: usize) -> Result<()> {
    match (&layer.bias, has_bias) {
        (Some(b), true) if b.shape() == [len] => Ok(()),
        (None, false) => Ok(()),
        _ => Err(Error::InvalidNetwork(format!(
            "layer {i}: bias presence/shape disagrees with spec (expected {})",
            if has_bias { format!("[{len}]") } else { "none".into() }
        ))),
    }
}

// ---------------------------------------------------------------------------
// Layer kernels
// ---------------------------------------------------------------------------

fn conv2d_forward<S: Scalar>(layer: &Layer<S>, input: &Tensor<S>, n: usize) -> Tensor<S> {
    let LayerSpec::Conv2d { in_channels, out_channels, kernel, stride, padding, .. } = layer.spec
    else {
        unreachable!()
    };
    let (h, w) = (input.shape()[2], input.shape()[3]);
    let oh = (h + 2 * padding - kernel) / stride + 1;
    let ow = (w + 2 * padding - kernel) / stride + 1;
    let weight = layer.weight.as_ref().unwrap().data();
    let x = input.data();
    let mut out = Tensor::zeros(vec![n, out_channels, oh, ow]);
    let o = out.data_mut();
    for ni in 0..n {
        for co in 0..out_channels {
            let b = layer.bias.as_ref().map_or(S::ZERO, |b| b.data()[co]);
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = b;
                    for ci in 0..in_channels {
                        let xbase = ((ni * in_channels) + ci) * h * w;
                        let wbase = ((co * in_channels) + ci) * kernel * kernel;
                        for ky in 0..kernel {
                            let iy = oy * stride + ky;
                            if iy < padding || iy - padding >= h {
                                continue;
                            }
                            let iy = iy - padding;
                            for kx in 0..kernel {
                                let ix = ox * stride + kx;
                                if ix < padding || ix - padding >= w {
                                    continue;
                                }
                                let ix = ix - padding;
                                acc += weight[wbase + ky * kernel + kx] * x[xbase + iy * w + ix];
                            }
                        }
                    }
                    o[(((ni * out_channels) + co) * oh + oy) * ow + ox] = acc;
                }
            }
        }
    }
    out
}

fn conv2d_backward<S: Scalar>(
    layer: &Layer<S>,
    input: &Tensor<S>,
    gout: &Tensor<S>,
    n: usize,
) -> (Tensor<S>, Tensor<S>, Option<Tensor<S>>) {
    let LayerSpec::Conv2d { in_channels, out_channels, kernel, stride, padding, bias } = layer.spec
    else {
        unreachable!()
    };
    let (h, w) = (input.shape()[2], input.shape()[3]);
    let (oh, ow) = (gout.shape()[2], gout.shape()[3]);
    let weight = layer.weight.as_ref().unwrap().data();
    let x = input.data();
    let g = gout.data();

    let mut gin = Tensor::zeros(input.shape().to_vec());
    let mut gw = Tensor::zeros(vec![out_channels, in_channels, kernel, kernel]);
    let mut gb = bias.then(|| Tensor::zeros(vec![out_channels]));
    let gid = gin.data_mut();
    let gwd = gw.data_mut();

    for ni in 0..n {
        for co in 0..out_channels {
            for oy in 0..oh {
                for ox in 0..ow {
                    let go = g[(((ni * out_channels) + co) * oh + oy) * ow + ox];
                    if let Some(gb) = gb.as_mut() {
                        gb.data_mut()[co] += go;
                    }
                    for ci in 0..in_channels {
                        let xbase = ((ni * in_channels) + ci) * h * w;
                        let wbase = ((co * in_channels) + ci) * kernel * kernel;
                        for ky in 0..kernel {
                            let iy = oy * stride + ky;
                            if iy < padding || iy - padding >= h {
                                continue;
                            }
                            let iy = iy - padding;
                            for kx in 0..kernel {
                                let ix = ox * stride + kx;
                                if ix < padding || ix - padding >= w {
                                    continue;
                                }
                                let ix = ix - padding;
                                gwd[wbase + ky * kernel + kx] += go * x[xbase + iy * w + ix];
                                gid[xbase + iy * w + ix] += go * weight[wbase + ky * kernel + kx];
                            }
                        }
                    }
                }
            }
        }
    }
    (gin, gw, gb)
}

fn dense_forward<S: Scalar>(layer: &Layer<S>, input: &Tensor<S>, n: usize) -> Tensor<S> {
    let LayerSpec::Dense { in_features, out_features, .. } = layer.spec else { unreachable!() };
    let weight = layer.weight.as_ref().unwrap().data();
    let x = input.data();
    let mut out = Tensor::zeros(vec![n, out_features]);
    let o = out.data_mut();
    for ni in 0..n {
        for u in 0..out_features {
            let mut acc = layer.bias.as_ref().map_or(S::ZERO, |b| b.data()[u]);
            let wrow = u * in_features;
            let xrow = ni * in_features;
            for f in 0..in_features {
                acc += weight[wrow + f] * x[xrow + f];
            }
            o[ni * out_features + u] = acc;
        }
    }
    out
}

fn dense_backward<S: Scalar>(
    layer: &Layer<S>,
    input: &Tensor<S>,
    gout: &Tensor<S>,
    n: usize,
) -> (Tensor<S>, Tensor<S>, Option<Tensor<S>>) {
    let LayerSpec::Dense { in_features, out_features, bias } = layer.spec else { unreachable!() };
    let weight = layer.weight.as_ref().unwrap().data();
    let x = input.data();
    let g = gout.data();
    let mut gin = Tensor::zeros(vec![n, in_features]);
    let mut gw = Tensor::zeros(vec![out_features, in_features]);
    let mut gb = bias.then(|| Tensor::zeros(vec![out_features]));
    let gid = gin.data_mut();
    let gwd = gw.data_mut();
    for ni in 0..n {
        for u in 0..out_features {
            let go = g[ni * out_features + u];
            if let Some(gb) = gb.as_mut() {
                gb.data_mut()[u] += go;
            }
            let wrow = u * in_features;
            let xrow = ni * in_features;
            for f in 0..in_features {
                gwd[wrow + f] += go * x[xrow + f];
                gid[xrow + f] += go * weight[wrow + f];
            }
        }
    }
    (gin, gw, gb)
}

fn maxpool_forward<S: Scalar>(input: &Tensor<S>, kernel: usize, stride: usize) -> (Tensor<S>, Vec<u32>) {
    let (n, c, h, w) =
        (input.shape()[0], input.shape()[1], input.shape()[2], input.shape()[3]);
    let oh = (h - kernel) / stride + 1;
    let ow = (w - kernel) / stride + 1;
    let x = input.data();
    let mut out = Tensor::zeros(vec![n, c, oh, ow]);
    let mut argmax = vec![0u32; n * c * oh * ow];
    let o = out.data_mut();
    for ni in 0..n {
        for ci in 0..c {
            let base = ((ni * c) + ci) * h * w;
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut best_idx = base + (oy * stride) * w + ox * stride;
                    let mut best = x[best_idx];
                    for ky in 0..kernel {
                        for kx in 0..kernel {
                            let idx = base + (oy * stride + ky) * w + (ox * stride + kx);
                            if x[idx] > best {
                                best = x[idx];
                                best_idx = idx;
                            }
                        }
                    }
                    let oidx = (((ni * c) + ci) * oh + oy) * ow + ox;
                    o[oidx] = best;
                    argmax[oidx] = best_idx as u32;
                }
            }
        }
    }
    (out, argmax)
}

fn gap_forward<S: Scalar>(input: &Tensor<S>) -> Tensor<S> {
    let (n, c, h, w) =
        (input.shape()[0], input.shape()[1], input.shape()[2], input.shape()[3]);
    let x = input.data();
    let inv = S::from_f64(1.0 / (h * w) as f64);
    let mut out = Tensor::zeros(vec![n, c]);
    let o = out.data_mut();
    for ni in 0..n {
        for ci in 0..c {
            let base = ((ni * c) + ci) * h * w;
            let mut acc = S::ZERO;
            for i in 0..h * w {
                acc += x[base + i];
            }
            o[ni * c + ci] = acc * inv;
        }
    }
    out
}

fn gap_backward<S: Scalar>(input: &Tensor<S>, gout: &Tensor<S>) -> Tensor<S> {
    let (n, c, h, w) =
        (input.shape()[0], input.shape()[1], input.shape()[2], input.shape()[3]);
    let inv = S::from_f64(1.0 / (h * w) as f64);
    let g = gout.data();
    let mut gin = Tensor::zeros(input.shape().to_vec());
    let gd = gin.data_mut();
    for ni in 0..n {
        for ci in 0..c {
            let go = g[ni * c + ci] * inv;
            let base = ((ni * c) + ci) * h * w;
            for i in 0..h * w {
                gd[base + i] = go;
            }
        }
    }
    gin
}

// ---------------------------------------------------------------------------
// Builder
// ---------------------------------------------------------------------------

/// Incrementally assembles a network, inferring input channel/feature counts
/// from the running activation shape.
pub struct NetworkBuilder {
    input_shape: Vec<usize>,
    specs: Vec<LayerSpec>,
    shape: Vec<usize>,
    error: Option<Error>,
}

impl NetworkBuilder {
    pub fn new(input_shape: &[usize]) -> Self {
        Self {
            input_shape: input_shape.to_vec(),
            specs: Vec::new(),
            shape: input_shape.to_vec(),
            error: None,
        }
    }

    fn push(mut self, make: impl FnOnce(&[usize]) -> Result<LayerSpec>) -> Self {
        if self.error.is_some() {
            return self;
        }
        let idx = self.specs.len();
        match make(&self.shape).and_then(|spec| {
            let out = spec.output_shape(idx, &self.shape)?;
            Ok((spec, out))
        }) {
            Ok((spec, out)) => {
                self.specs.push(spec);
                self.shape = out;
            }
            Err(e) => self.error = Some(e),
        }
        self
    }

    pub fn conv2d(self, out_channels: usize, kernel: usize, stride: usize, padding: usize, bias: bool) -> Self {
        self.push(|shape| {
            let in_channels = *shape.first().filter(|_| shape.len() == 3).ok_or_else(|| {
                Error::InvalidNetwork(format!("conv2d needs a [C,H,W] activation, have {shape:?}"))
            })?;
            Ok(LayerSpec::Conv2d { in_channels, out_channels, kernel, stride, padding, bias })
        })
    }

    pub fn dense(self, out_features: usize, bias: bool) -> Self {
        self.push(|shape| {
            if shape.len() != 1 {
                return Err(Error::InvalidNetwork(format!(
                    "dense needs a flat activation, have {shape:?} (add flatten or global-avg-pool)"
                )));
            }
            Ok(LayerSpec::Dense { in_features: shape[0], out_features, bias })
        })
    }

    pub fn relu(self) -> Self {
        self.push(|_| Ok(LayerSpec::Relu))
    }

    pub fn maxpool2d(self, kernel: usize, stride: usize) -> Self {
        self.push(|_| Ok(LayerSpec::MaxPool2d { kernel, stride }))
    }

    pub fn global_avg_pool(self) -> Self {
        self.push(|_| Ok(LayerSpec::GlobalAvgPool))
    }

    pub fn flatten(self) -> Self {
        self.push(|_| Ok(LayerSpec::Flatten))
    }

    pub fn residual_add(self, source: usize) -> Self {
        self.push(move |_| Ok(LayerSpec::ResidualAdd { source }))
    }

    /// Index the next layer will get; convenient for wiring residual sources.
    pub fn next_index(&self) -> usize {
        self.specs.len()
    }

    /// Initialize parameters (Kaiming-uniform weights, zero biases) from the
    /// given seed and produce the validated network.
    pub fn build_seeded(self, seed: u64) -> Result<Network<f32>> {
        self.build_with_rng(&mut seeded(seed))
    }

    pub fn build_with_rng(self, rng: &mut ChaCha8Rng) -> Result<Network<f32>> {
        if let Some(e) = self.error {
            return Err(e);
        }
        let layers = self
            .specs
            .into_iter()
            .map(|spec| init_layer(spec, rng))
            .collect::<Result<Vec<_>>>()?;
        Network::from_parts(self.input_shape, layers)
    }
}

fn init_layer(spec: LayerSpec, rng: &mut ChaCha8Rng) -> Result<Layer<f32>> {
    let (weight, bias) = match spec {
        LayerSpec::Conv2d { in_channels, out_channels, kernel, bias, .. } => {
            let fan_in = in_channels * kernel * kernel;
            let w = kaiming_uniform(vec![out_channels, in_channels, kernel, kernel], fan_in, rng);
            (Some(w), bias.then(|| Tensor::zeros(vec![out_channels])))
        }
        LayerSpec::Dense { in_features, out_features, bias } => {
            let w = kaiming_uniform(vec![out_features, in_features], in_features, rng);
            (Some(w), bias.then(|| Tensor::zeros(vec![out_features])))
        }
        _ => (None, None),
    };
    Ok(Layer { spec, weight, bias })
}
