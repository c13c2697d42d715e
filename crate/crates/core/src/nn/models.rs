//! Model zoo.
//!
//! Four reference topologies cover the simulator's needs: two small models
//! that actually train at desk scale (`mlp-small`, `cnn-small`) and two
//! full-size topologies used for structural measurements (`resnet8`,
//! `vgg16`).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::network::{Network, NetworkBuilder};

/// ResNet-8 stage width; calibrated so the 32-bit weight payload of the
/// 3/32/32-input, 10-class instance lands within a percent of 37.63 MB.
pub const RESNET8_WIDTH: usize = 142;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelId {
    MlpSmall,
    CnnSmall,
    Resnet8,
    Vgg16,
}

impl ModelId {
    pub const ALL: [ModelId; 4] =
        [ModelId::MlpSmall, ModelId::CnnSmall, ModelId::Resnet8, ModelId::Vgg16];

    /// Reference per-sample input shape and class count used by structural
    /// reports when no dataset dictates them.
    pub fn reference_input(self) -> (Vec<usize>, usize) {
        match self {
            ModelId::MlpSmall | ModelId::CnnSmall => (vec![1, 8, 8], 4),
            ModelId::Resnet8 | ModelId::Vgg16 => (vec![3, 32, 32], 10),
        }
    }

    /// Instantiate with Kaiming-uniform weights from `seed`.
    pub fn build(self, input_shape: &[usize], classes: usize, seed: u64) -> Result<Network<f32>> {
        match self {
            ModelId::MlpSmall => mlp_small(input_shape, classes, seed),
            ModelId::CnnSmall => cnn_small(input_shape, classes, seed),
            ModelId::Resnet8 => resnet8(input_shape, classes, seed),
            ModelId::Vgg16 => vgg16(input_shape, classes, seed),
        }
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ModelId::MlpSmall => "mlp-small",
            ModelId::CnnSmall => "cnn-small",
            ModelId::Resnet8 => "resnet8",
            ModelId::Vgg16 => "vgg16",
        };
        f.write_str(s)
    }
}

impl FromStr for ModelId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mlp-small" => Ok(ModelId::MlpSmall),
            "cnn-small" => Ok(ModelId::CnnSmall),
            "resnet8" => Ok(ModelId::Resnet8),
            "vgg16" => Ok(ModelId::Vgg16),
            other => Err(Error::InvalidArgument(format!(
                "unknown model {other:?}; expected one of mlp-small, cnn-small, resnet8, vgg16"
            ))),
        }
    }
}

/// Two hidden dense layers (128, 64) over the flattened input.
pub fn mlp_small(input_shape: &[usize], classes: usize, seed: u64) -> Result<Network<f32>> {
    NetworkBuilder::new(input_shape)
        .flatten()
        .dense(128, true)
        .relu()
        .dense(64, true)
        .relu()
        .dense(classes, true)
        .build_seeded(seed)
}

/// Two conv blocks (16, 32 channels) with 2x2 pooling, flattened into the
/// classifier. Input must be at least 4x4.
pub fn cnn_small(input_shape: &[usize], classes: usize, seed: u64) -> Result<Network<f32>> {
    NetworkBuilder::new(input_shape)
        .conv2d(16, 3, 1, 1, true)
        .relu()
        .maxpool2d(2, 2)
        .conv2d(32, 3, 1, 1, true)
        .relu()
        .maxpool2d(2, 2)
        .flatten()
        .dense(classes, true)
        .build_seeded(seed)
}

/// Three stages of identity-skip residual blocks at widths w, 2w, 4w
/// (w = [`RESNET8_WIDTH`]), joined by pool-and-widen transition convs, with
/// GAP and a dense classifier. Every block contributes one dependency group
/// tying its two same-width convs together.
pub fn resnet8(input_shape: &[usize], classes: usize, seed: u64) -> Result<Network<f32>> {
    let w = RESNET8_WIDTH;
    let mut b = NetworkBuilder::new(input_shape)
        .conv2d(w, 3, 1, 1, true)
        .relu();
    for (stage, width) in [w, 2 * w, 4 * w].into_iter().enumerate() {
        if stage > 0 {
            b = b.maxpool2d(2, 2).conv2d(width, 3, 1, 1, true).relu();
        }
        let skip_source = b.next_index() - 1;
        b = b
            .conv2d(width, 3, 1, 1, true)
            .relu()
            .conv2d(width, 3, 1, 1, true)
            .residual_add(skip_source)
            .relu();
    }
    b.global_avg_pool().dense(classes, true).build_seeded(seed)
}

/// 13-conv VGG backbone for 32x32 inputs with the classic 4096-wide
/// two-layer classifier head.
///
/// Chosen widths: convs 64,64 / 128,128 / 256,256,256 / 512,512,512 /
/// 512,512,512 with 2x2 pooling after each group (spatial 32 -> 1), then
/// dense 512 -> 4096 -> 4096 -> classes. At 3/32/32 input and 10 classes
/// this counts 33,638,218 parameters and ~0.332 GFLOPs per sample.
pub fn vgg16(input_shape: &[usize], classes: usize, seed: u64) -> Result<Network<f32>> {
    let groups: [&[usize]; 5] =
        [&[64, 64], &[128, 128], &[256, 256, 256], &[512, 512, 512], &[512, 512, 512]];
    let mut b = NetworkBuilder::new(input_shape);
    for group in groups {
        for &width in group {
            b = b.conv2d(width, 3, 1, 1, true).relu();
        }
        b = b.maxpool2d(2, 2);
    }
    b.flatten()
        .dense(4096, true)
        .relu()
        .dense(4096, true)
        .relu()
        .dense(classes, true)
        .build_seeded(seed)
}
