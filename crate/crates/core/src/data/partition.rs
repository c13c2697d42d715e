//! Dirichlet non-IID partitioning.
//!
//! For every class, client proportions are drawn from Dirichlet(alpha, ...,
//! alpha) and that class's (shuffled) samples are split at the implied cut
//! points. Small alpha concentrates classes on few clients; large alpha
//! approaches a uniform split.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::rng::seeded;

const MAX_ATTEMPTS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct PartitionSpec {
    pub clients: usize,
    pub alpha: f64,
    pub seed: u64,
    /// Smallest shard size accepted; draws are retried (bounded) until every
    /// shard reaches it.
    pub min_shard: usize,
}

/// Exact per-class histogram of a shard.
pub fn class_counts(shard: &LabeledDataset) -> Vec<u64> {
    let mut counts = vec![0u64; shard.classes()];
    for &label in shard.labels() {
        counts[label as usize] += 1;
    }
    counts
}

/// Split `ds` into `spec.clients` disjoint shards covering every sample.
pub fn dirichlet_partition(ds: &LabeledDataset, spec: &PartitionSpec) -> Result<Vec<LabeledDataset>> {
    if spec.clients == 0 {
        return Err(Error::InvalidArgument("partition needs at least one client".into()));
    }
    if !crate::error::positive(spec.alpha) {
        return Err(Error::InvalidArgument(format!("alpha must be positive, got {}", spec.alpha)));
    }
    if ds.is_empty() {
        return Err(Error::Data("cannot partition an empty dataset".into()));
    }
    if spec.clients * spec.min_shard > ds.len() {
        return Err(Error::PartitionExhausted {
            attempts: 0,
            detail: format!(
                "{} clients x min shard {} exceeds {} samples",
                spec.clients,
                spec.min_shard,
                ds.len()
            ),
        });
    }

    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); ds.classes()];
    for (i, &label) in ds.labels().iter().enumerate() {
        by_class[label as usize].push(i);
    }

    let mut rng = seeded(spec.seed);
    let mut smallest_seen = 0usize;
    for _ in 0..MAX_ATTEMPTS {
        let assignment = draw_assignment(&by_class, spec, &mut rng)?;
        let smallest = assignment.iter().map(Vec::len).min().unwrap_or(0);
        if smallest >= spec.min_shard {
            return assignment
                .into_iter()
                .map(|indices| Ok(ds.subset(&indices)))
                .collect();
        }
        smallest_seen = smallest_seen.max(smallest);
    }
    Err(Error::PartitionExhausted {
        attempts: MAX_ATTEMPTS,
        detail: format!(
            "best attempt left a shard of {smallest_seen} < min {}",
            spec.min_shard
        ),
    })
}

fn draw_assignment(
    by_class: &[Vec<usize>],
    spec: &PartitionSpec,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Vec<usize>>> {
    let mut shards: Vec<Vec<usize>> = vec![Vec::new(); spec.clients];
    for class_indices in by_class {
        if class_indices.is_empty() {
            continue;
        }
        let mut indices = class_indices.clone();
        indices.shuffle(rng);
        let proportions = dirichlet_draw(spec.alpha, spec.clients, rng)?;
        // Cut the shuffled class at the rounded cumulative proportions so the
        // pieces are disjoint and cover everything.
        let n = indices.len() as f64;
        let mut cumulative = 0.0;
        let mut start = 0usize;
        for (client, p) in proportions.iter().enumerate() {
            cumulative += p;
            let end = if client + 1 == spec.clients {
                indices.len()
            } else {
                (cumulative * n).round() as usize
            }
            .clamp(start, indices.len());
            shards[client].extend_from_slice(&indices[start..end]);
            start = end;
        }
    }
    // Keep each shard in stable (original) order for determinism-friendly
    // downstream batching.
    for shard in &mut shards {
        shard.sort_unstable();
    }
    Ok(shards)
}

/// Dirichlet(alpha, ..., alpha) via normalized Gamma draws.
fn dirichlet_draw(alpha: f64, n: usize, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    let gamma = Gamma::new(alpha, 1.0)
        .map_err(|e| Error::InvalidArgument(format!("bad Dirichlet alpha {alpha}: {e}")))?;
    loop {
        let draws: Vec<f64> = (0..n).map(|_| gamma.sample(rng)).collect();
        let sum: f64 = draws.iter().sum();
        if sum > 0.0 && sum.is_finite() {
            return Ok(draws.into_iter().map(|d| d / sum).collect());
        }
        // All-zero draws can occur for tiny alpha; redraw.
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    /// Dataset whose sample values encode their original index, so shard
    /// contents can be compared as multisets.
    fn indexed_dataset(per_class: usize, classes: usize) -> LabeledDataset {
        let n = per_class * classes;
        let data: Vec<f32> = (0..n).map(|i| i as f32).collect();
        let labels: Vec<u32> = (0..n).map(|i| (i % classes) as u32).collect();
        LabeledDataset::new(Tensor::new(vec![n, 1], data).unwrap(), labels, classes).unwrap()
    }

    fn spec(clients: usize, alpha: f64, seed: u64) -> PartitionSpec {
        PartitionSpec { clients, alpha, seed, min_shard: 0 }
    }

    #[test]
    fn single_client_gets_everything() {
        let ds = indexed_dataset(10, 3);
        let shards = dirichlet_partition(&ds, &spec(1, 1.0, 7)).unwrap();
        assert_eq!(shards.len(), 1);
        assert_eq!(shards[0], ds);
    }

    #[test]
    fn shards_are_disjoint_and_cover_the_dataset() {
        // Brute-force index multiset oracle via the encoded sample values.
        let ds = indexed_dataset(50, 4);
        let shards = dirichlet_partition(&ds, &spec(5, 1.0, 42)).unwrap();
        let mut seen: Vec<u32> = shards
            .iter()
            .flat_map(|s| s.samples().data().iter().map(|&v| v as u32))
            .collect();
        seen.sort_unstable();
        let expected: Vec<u32> = (0..ds.len() as u32).collect();
        assert_eq!(seen, expected, "shards must partition the sample indices");
        assert_eq!(shards.iter().map(LabeledDataset::len).sum::<usize>(), ds.len());
    }

    #[test]
    fn class_counts_sum_to_parent_histogram() {
        let ds = indexed_dataset(30, 5);
        let shards = dirichlet_partition(&ds, &spec(4, 0.5, 3)).unwrap();
        let parent = class_counts(&ds);
        let mut summed = vec![0u64; 5];
        for shard in &shards {
            for (total, c) in summed.iter_mut().zip(class_counts(shard)) {
                *total += c;
            }
            assert_eq!(
                class_counts(shard).iter().sum::<u64>(),
                shard.len() as u64
            );
        }
        assert_eq!(summed, parent);
    }

    #[test]
    fn huge_alpha_approaches_uniform_shares() {
        // 40k balanced samples over 4 clients at alpha = 1e6: every client's
        // per-class share lands within 5% of 1/4.
        let ds = indexed_dataset(10_000, 4);
        let shards = dirichlet_partition(&ds, &spec(4, 1e6, 11)).unwrap();
        for shard in &shards {
            for (class, count) in class_counts(shard).iter().enumerate() {
                let share = *count as f64 / 10_000.0;
                assert!(
                    (share - 0.25).abs() < 0.05 * 0.25 + 0.0125,
                    "class {class} share {share}"
                );
            }
        }
    }

    #[test]
    fn identical_seeds_give_identical_partitions() {
        let ds = indexed_dataset(40, 3);
        let a = dirichlet_partition(&ds, &spec(3, 0.3, 99)).unwrap();
        let b = dirichlet_partition(&ds, &spec(3, 0.3, 99)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn empty_labels_histogram_is_zero() {
        let ds = LabeledDataset::new(Tensor::zeros(vec![0, 1]), vec![], 4).unwrap();
        assert_eq!(class_counts(&ds), vec![0, 0, 0, 0]);
        let ds = LabeledDataset::new(
            Tensor::zeros(vec![3, 1]),
            vec![0, 0, 1],
            4,
        )
        .unwrap();
        assert_eq!(class_counts(&ds), vec![2, 1, 0, 0]);
    }

    #[test]
    fn unsatisfiable_min_shard_errors_out() {
        let ds = indexed_dataset(5, 2); // 10 samples
        let bad = PartitionSpec { clients: 3, alpha: 1.0, seed: 0, min_shard: 5 };
        let err = dirichlet_partition(&ds, &bad).unwrap_err();
        assert!(matches!(err, Error::PartitionExhausted { .. }));
    }

    #[test]
    fn min_shard_is_enforced_via_retry() {
        let ds = indexed_dataset(100, 4);
        let spec = PartitionSpec { clients: 4, alpha: 0.3, seed: 21, min_shard: 20 };
        let shards = dirichlet_partition(&ds, &spec).unwrap();
        assert!(shards.iter().all(|s| s.len() >= 20));
    }
}
