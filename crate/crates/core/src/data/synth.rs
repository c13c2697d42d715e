//! Synthetic Gaussian-blob datasets.
//!
//! Each class is an isotropic unit-variance Gaussian around a centroid at
//! distance `separation` from the origin in a seeded random direction, so
//! `separation` dials the Bayes error from chance (0) to trivially
//! separable.
//!
//! Centroids and noise come from separate derived streams: a held-out
//! split shares the training centroids (same domain, fresh draws), while a
//! public set may either share them or use a shifted domain whose classes
//! correspond to the private ones by index only.

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::{LabeledDataset, PublicDataset};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, seeded, STREAM_PUBLIC};
use crate::tensor::Tensor;

const CENTROID_STREAM: u64 = 0xB10B;
const NOISE_STREAM: u64 = 0x7015E;
const HOLDOUT_NOISE_STREAM: u64 = 0x8E1D;

/// Generate `classes * per_class` labeled samples of `input_shape`.
pub fn synth_dataset(
    classes: usize,
    per_class: usize,
    input_shape: &[usize],
    separation: f64,
    seed: u64,
) -> Result<LabeledDataset> {
    let centroids = centroids_for(classes, input_shape, separation, seed)?;
    blobs(&centroids, per_class, input_shape, derive_seed(seed, NOISE_STREAM))
}

/// Held-out split: the same class centroids as [`synth_dataset`] for this
/// seed, with an independent noise stream.
pub fn synth_holdout(
    classes: usize,
    per_class: usize,
    input_shape: &[usize],
    separation: f64,
    seed: u64,
) -> Result<LabeledDataset> {
    let centroids = centroids_for(classes, input_shape, separation, seed)?;
    blobs(&centroids, per_class, input_shape, derive_seed(seed, HOLDOUT_NOISE_STREAM))
}

/// Unlabeled public set over the same label-space cardinality.
///
/// With `same_domain` the private centroids are reused (fresh noise);
/// otherwise centroids come from an independent stream: a distinct domain
/// whose classes map to the private ones by index.
pub fn synth_public(
    classes: usize,
    samples: usize,
    input_shape: &[usize],
    separation: f64,
    seed: u64,
    same_domain: bool,
) -> Result<PublicDataset> {
    if samples == 0 {
        return Err(Error::InvalidArgument("public set needs at least one sample".into()));
    }
    let centroid_seed = if same_domain { seed } else { derive_seed(seed, STREAM_PUBLIC) };
    let centroids = centroids_for(classes, input_shape, separation, centroid_seed)?;
    let per_class = samples.div_ceil(classes).max(1);
    let ds = blobs(
        &centroids,
        per_class,
        input_shape,
        derive_seed(seed, STREAM_PUBLIC ^ NOISE_STREAM),
    )?;
    let indices: Vec<usize> = (0..samples.min(ds.len())).collect();
    Ok(PublicDataset::from_labeled(&ds.subset(&indices)))
}

fn centroids_for(
    classes: usize,
    input_shape: &[usize],
    separation: f64,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    if classes == 0 {
        return Err(Error::InvalidArgument("need at least one class".into()));
    }
    if !crate::error::non_negative(separation) {
        return Err(Error::InvalidArgument(format!("separation {separation} must be >= 0")));
    }
    let dim: usize = input_shape.iter().product();
    if dim == 0 || input_shape.is_empty() {
        return Err(Error::InvalidArgument(format!("bad input shape {input_shape:?}")));
    }
    let mut rng = seeded(derive_seed(seed, CENTROID_STREAM));
    Ok((0..classes)
        .map(|_| {
            // Spatial inputs get smooth low-frequency patterns (a coarse
            // grid, bilinearly upsampled) so that convolutional models see
            // learnable structure; flat inputs use plain random directions.
            let raw = match *input_shape {
                [c, h, w] if h > 1 || w > 1 => smooth_pattern(c, h, w, &mut rng),
                _ => (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect(),
            };
            let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
            raw.into_iter().map(|v| v / norm * separation).collect()
        })
        .collect())
}

const COARSE_GRID: usize = 4;

/// Random coarse grid per channel, bilinearly upsampled to H x W.
fn smooth_pattern(channels: usize, height: usize, width: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let g = COARSE_GRID;
    let mut out = Vec::with_capacity(channels * height * width);
    for _ in 0..channels {
        let grid: Vec<f64> = (0..g * g).map(|_| StandardNormal.sample(rng)).collect();
        for y in 0..height {
            let gy = if height > 1 { y as f64 * (g - 1) as f64 / (height - 1) as f64 } else { 0.0 };
            let (y0, ty) = (gy.floor() as usize, gy.fract());
            let y1 = (y0 + 1).min(g - 1);
            for x in 0..width {
                let gx =
                    if width > 1 { x as f64 * (g - 1) as f64 / (width - 1) as f64 } else { 0.0 };
                let (x0, tx) = (gx.floor() as usize, gx.fract());
                let x1 = (x0 + 1).min(g - 1);
                let top = grid[y0 * g + x0] * (1.0 - tx) + grid[y0 * g + x1] * tx;
                let bottom = grid[y1 * g + x0] * (1.0 - tx) + grid[y1 * g + x1] * tx;
                out.push(top * (1.0 - ty) + bottom * ty);
            }
        }
    }
    out
}

fn blobs(
    centroids: &[Vec<f64>],
    per_class: usize,
    input_shape: &[usize],
    noise_seed: u64,
) -> Result<LabeledDataset> {
    if per_class == 0 {
        return Err(Error::InvalidArgument("per_class must be positive".into()));
    }
    let classes = centroids.len();
    let dim: usize = input_shape.iter().product();
    let mut rng: ChaCha8Rng = seeded(noise_seed);
    let n = classes * per_class;
    let mut data = Vec::with_capacity(n * dim);
    let mut labels = Vec::with_capacity(n);
    for (class, centroid) in centroids.iter().enumerate() {
        for _ in 0..per_class {
            for c in centroid.iter() {
                let noise: f64 = StandardNormal.sample(&mut rng);
                data.push((c + noise) as f32);
            }
            labels.push(class as u32);
        }
    }
    let mut shape = vec![n];
    shape.extend_from_slice(input_shape);
    LabeledDataset::new(Tensor::new(shape, data)?, labels, classes)
}
