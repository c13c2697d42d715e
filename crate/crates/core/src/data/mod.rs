//! Datasets: loading, synthesis, and non-IID partitioning.

pub mod partition;
pub mod raw;
pub mod synth;

pub use partition::{class_counts, dirichlet_partition, PartitionSpec};
pub use raw::{load_raw, write_raw, RawFormat};
pub use synth::{synth_dataset, synth_holdout, synth_public};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Samples with class labels; the private training currency of a client.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    samples: Tensor<f32>,
    labels: Vec<u32>,
    classes: usize,
}

impl LabeledDataset {
    pub fn new(samples: Tensor<f32>, labels: Vec<u32>, classes: usize) -> Result<Self> {
        let n = samples.shape().first().copied().unwrap_or(0);
        if labels.len() != n {
            return Err(Error::Data(format!("{} labels for {n} samples", labels.len())));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l as usize >= classes) {
            return Err(Error::Data(format!("label {bad} out of range for {classes} classes")));
        }
        Ok(Self { samples, labels, classes })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn samples(&self) -> &Tensor<f32> {
        &self.samples
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    /// Per-sample shape.
    pub fn sample_shape(&self) -> &[usize] {
        &self.samples.shape()[1..]
    }

    /// Copy out the rows at `indices` (order preserved, duplicates allowed).
    pub fn subset(&self, indices: &[usize]) -> Self {
        let row: usize = self.sample_shape().iter().product();
        let mut data = Vec::with_capacity(indices.len() * row);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            data.extend_from_slice(&self.samples.data()[i * row..(i + 1) * row]);
            labels.push(self.labels[i]);
        }
        let mut shape = vec![indices.len()];
        shape.extend_from_slice(self.sample_shape());
        Self {
            samples: Tensor::new(shape, data).expect("subset shape is consistent"),
            labels,
            classes: self.classes,
        }
    }

    /// Batch of rows at `indices`, plus their labels.
    pub fn batch(&self, indices: &[usize]) -> (Tensor<f32>, Vec<u32>) {
        let sub = self.subset(indices);
        (sub.samples, sub.labels)
    }
}

/// Unlabeled samples for distillation. Carrying no labels is a type-level
/// guarantee: there is no accessor to recover any.
#[derive(Debug, Clone, PartialEq)]
pub struct PublicDataset {
    samples: Tensor<f32>,
}

impl PublicDataset {
    pub fn new(samples: Tensor<f32>) -> Result<Self> {
        if samples.shape().is_empty() {
            return Err(Error::Data("public dataset needs an [N, ...] sample tensor".into()));
        }
        Ok(Self { samples })
    }

    /// Drop the labels of a labeled dataset.
    pub fn from_labeled(ds: &LabeledDataset) -> Self {
        Self { samples: ds.samples.clone() }
    }

    pub fn len(&self) -> usize {
        self.samples.shape()[0]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn samples(&self) -> &Tensor<f32> {
        &self.samples
    }

    pub fn sample_shape(&self) -> &[usize] {
        &self.samples.shape()[1..]
    }

    /// Batch of rows at `indices`.
    pub fn batch(&self, indices: &[usize]) -> Tensor<f32> {
        let row: usize = self.sample_shape().iter().product();
        let mut data = Vec::with_capacity(indices.len() * row);
        for &i in indices {
            data.extend_from_slice(&self.samples.data()[i * row..(i + 1) * row]);
        }
        let mut shape = vec![indices.len()];
        shape.extend_from_slice(self.sample_shape());
        Tensor::new(shape, data).expect("batch shape is consistent")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_count_must_match_samples() {
        let samples = Tensor::zeros(vec![3, 2]);
        assert!(LabeledDataset::new(samples.clone(), vec![0, 1], 2).is_err());
        assert!(LabeledDataset::new(samples, vec![0, 1, 1], 2).is_ok());
    }

    #[test]
    fn labels_must_be_in_range() {
        let samples = Tensor::zeros(vec![2, 2]);
        assert!(LabeledDataset::new(samples, vec![0, 2], 2).is_err());
    }

    #[test]
    fn subset_preserves_rows() {
        let samples = Tensor::new(vec![3, 2], vec![0., 1., 10., 11., 20., 21.]).unwrap();
        let ds = LabeledDataset::new(samples, vec![0, 1, 2], 3).unwrap();
        let sub = ds.subset(&[2, 0]);
        assert_eq!(sub.samples().data(), &[20., 21., 0., 1.]);
        assert_eq!(sub.labels(), &[2, 0]);
    }
}
