//! Raw binary dataset records.
//!
//! One record is a label byte followed by `C * H * W` pixel bytes in
//! channel-major order; with H = W = 32 and C = 3 this is the CIFAR binary
//! layout. Pixels scale to [0, 1] on load, with optional per-channel
//! normalization on top.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawFormat {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub classes: usize,
    /// Optional per-channel (mean, std) applied after the [0, 1] scaling.
    #[serde(default)]
    pub normalize: Option<Vec<(f64, f64)>>,
}

impl RawFormat {
    pub fn record_bytes(&self) -> usize {
        1 + self.pixels()
    }

    fn pixels(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub fn validate(&self) -> Result<()> {
        if self.pixels() == 0 || self.classes == 0 {
            return Err(Error::InvalidArgument(format!("degenerate raw format {self:?}")));
        }
        if self.classes > 256 {
            return Err(Error::InvalidArgument(
                "raw labels are single bytes; at most 256 classes".into(),
            ));
        }
        if let Some(norm) = &self.normalize {
            if norm.len() != self.channels {
                return Err(Error::InvalidArgument(format!(
                    "{} normalization pairs for {} channels",
                    norm.len(),
                    self.channels
                )));
            }
            if norm.iter().any(|&(_, std)| std <= 0.0) {
                return Err(Error::InvalidArgument("normalization std must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Load every record of `path`. An empty file is a valid empty dataset.
pub fn load_raw(path: &Path, format: &RawFormat) -> Result<LabeledDataset> {
    format.validate()?;
    let bytes = fs::read(path)?;
    let record = format.record_bytes();
    if bytes.len() % record != 0 {
        let offset = bytes.len() - bytes.len() % record;
        return Err(Error::RawFormat {
            offset: offset as u64,
            detail: format!(
                "truncated record: {} trailing bytes, record size is {record}",
                bytes.len() - offset
            ),
        });
    }
    let n = bytes.len() / record;
    let pixels = format.pixels();
    let mut data = Vec::with_capacity(n * pixels);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let offset = i * record;
        let label = bytes[offset];
        if label as usize >= format.classes {
            return Err(Error::RawFormat {
                offset: offset as u64,
                detail: format!("label {label} out of range for {} classes", format.classes),
            });
        }
        labels.push(label as u32);
        for (p, &byte) in bytes[offset + 1..offset + record].iter().enumerate() {
            let mut v = byte as f64 / 255.0;
            if let Some(norm) = &format.normalize {
                let channel = p / (format.height * format.width);
                let (mean, std) = norm[channel];
                v = (v - mean) / std;
            }
            data.push(v as f32);
        }
    }
    let shape = vec![n, format.channels, format.height, format.width];
    LabeledDataset::new(Tensor::new(shape, data)?, labels, format.classes)
}

/// Write a dataset in the raw record format, quantizing pixels to bytes
/// (clamped to [0, 1]). The inverse of [`load_raw`] up to that quantization;
/// normalization must be disabled.
pub fn write_raw(ds: &LabeledDataset, path: &Path) -> Result<()> {
    let dims = ds.sample_shape();
    if dims.len() != 3 {
        return Err(Error::Data(format!(
            "raw records need [C,H,W] samples, dataset has {dims:?}"
        )));
    }
    let pixels: usize = dims.iter().product();
    let mut bytes = Vec::with_capacity(ds.len() * (1 + pixels));
    for i in 0..ds.len() {
        bytes.push(ds.labels()[i] as u8);
        for &v in &ds.samples().data()[i * pixels..(i + 1) * pixels] {
            bytes.push((v.clamp(0.0, 1.0) * 255.0).round() as u8);
        }
    }
    fs::write(path, bytes)?;
    Ok(())
}
