//! Per-class client importance weights.
//!
//! A client's weight for class t is its share of all samples of that class
//! across the fleet. Classes no client holds are flagged uncovered and play
//! no part in distillation.

use serde::Serialize;

use crate::error::{Error, Result};

/// Column-normalized weights: `weight(t, c)` sums to one over clients for
/// every covered class.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImportanceWeights {
    /// weights[t][c] for class t, client c.
    weights: Vec<Vec<f64>>,
    covered: Vec<bool>,
}

impl ImportanceWeights {
    pub fn classes(&self) -> usize {
        self.weights.len()
    }

    pub fn clients(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    pub fn weight(&self, class: usize, client: usize) -> f64 {
        self.weights[class][client]
    }

    pub fn is_covered(&self, class: usize) -> bool {
        self.covered[class]
    }

    pub fn covered_classes(&self) -> impl Iterator<Item = usize> + '_ {
        self.covered.iter().enumerate().filter(|(_, &c)| c).map(|(t, _)| t)
    }
}

/// Normalize a per-class, per-client sample-count matrix
/// (`counts[t][c]`) into importance weights.
pub fn compute_importance_weights(counts: &[Vec<u64>]) -> Result<ImportanceWeights> {
    let clients = counts.first().map_or(0, Vec::len);
    if counts.iter().any(|row| row.len() != clients) {
        return Err(Error::InvalidArgument("ragged count matrix".into()));
    }
    let mut weights = Vec::with_capacity(counts.len());
    let mut covered = Vec::with_capacity(counts.len());
    for row in counts {
        let total: u64 = row.iter().sum();
        if total == 0 {
            weights.push(vec![0.0; clients]);
            covered.push(false);
        } else {
            weights.push(row.iter().map(|&c| c as f64 / total as f64).collect());
            covered.push(true);
        }
    }
    Ok(ImportanceWeights { weights, covered })
}
