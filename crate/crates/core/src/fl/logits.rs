//! Client logit matrices and teacher aggregation.

use std::collections::BTreeSet;

use crate::data::PublicDataset;
use crate::error::{Error, Result};
use crate::fl::importance::ImportanceWeights;
use crate::nn::network::Network;
use crate::tensor::Tensor;

const FORWARD_BATCH: usize = 256;

/// Per-sample, per-class logits on the public set. Classes outside the
/// producer's coverage are absent: `get` returns None for them and
/// aggregation never reads them.
#[derive(Debug, Clone, PartialEq)]
pub struct LogitMatrix {
    values: Tensor<f32>,
    coverage: BTreeSet<usize>,
}

impl LogitMatrix {
    pub fn new(values: Tensor<f32>, coverage: BTreeSet<usize>) -> Result<Self> {
        let [_, classes] = match values.shape() {
            [n, t] => [*n, *t],
            other => {
                return Err(Error::InvalidArgument(format!(
                    "logit matrix must be [N,T], got {other:?}"
                )))
            }
        };
        if coverage.is_empty() {
            return Err(Error::InvalidArgument("logit coverage must be non-empty".into()));
        }
        if coverage.iter().any(|&t| t >= classes) {
            return Err(Error::InvalidArgument(format!(
                "coverage {coverage:?} exceeds {classes} classes"
            )));
        }
        values.validate_finite("logit matrix")?;
        Ok(Self { values, coverage })
    }

    pub fn samples(&self) -> usize {
        self.values.shape()[0]
    }

    pub fn classes(&self) -> usize {
        self.values.shape()[1]
    }

    pub fn coverage(&self) -> &BTreeSet<usize> {
        &self.coverage
    }

    /// Logit for (sample, class), or None when the class is absent.
    pub fn get(&self, sample: usize, class: usize) -> Option<f32> {
        self.coverage
            .contains(&class)
            .then(|| self.values.data()[sample * self.classes() + class])
    }

    /// Number of present (transferable) logit values.
    pub fn present_logits(&self) -> u64 {
        self.samples() as u64 * self.coverage.len() as u64
    }

    /// Rows at `indices` as a dense [n, T] tensor (absent entries are
    /// zero-filled; pair with the coverage mask when consuming).
    pub fn rows(&self, indices: &[usize]) -> Tensor<f32> {
        let t = self.classes();
        let mut data = Vec::with_capacity(indices.len() * t);
        for &i in indices {
            for class in 0..t {
                data.push(self.get(i, class).unwrap_or(0.0));
            }
        }
        Tensor::new(vec![indices.len(), t], data).expect("row slice is consistent")
    }

    /// Per-class presence mask.
    pub fn coverage_mask(&self) -> Vec<bool> {
        (0..self.classes()).map(|t| self.coverage.contains(&t)).collect()
    }
}

/// One forward pass of the client model over every public sample: exactly
/// one scoring per sample, per the one-shot contract. Classes outside
/// `coverage` are marked absent.
pub fn client_logits(
    net: &Network<f32>,
    public: &PublicDataset,
    coverage: &BTreeSet<usize>,
) -> Result<LogitMatrix> {
    if public.is_empty() {
        return Err(Error::Data("public dataset is empty".into()));
    }
    let n = public.len();
    let classes = match net.output_shape() {
        [t] => *t,
        other => {
            return Err(Error::InvalidArgument(format!(
                "client model must end in flat class logits, got {other:?}"
            )))
        }
    };
    let mut data = Vec::with_capacity(n * classes);
    let indices: Vec<usize> = (0..n).collect();
    for chunk in indices.chunks(FORWARD_BATCH) {
        let batch = public.batch(chunk);
        let logits = net.forward(&batch)?;
        data.extend_from_slice(logits.data());
    }
    LogitMatrix::new(Tensor::new(vec![n, classes], data)?, coverage.clone())
}

/// Combine client logit matrices into teacher knowledge.
///
/// For each class the present clients' logits are averaged under the
/// importance weights, renormalized over just those clients so partial
/// coverage does not shrink magnitudes. Classes covered by no client are
/// absent from the result; if nothing is covered there is nothing to
/// distill and aggregation fails.
pub fn aggregate_teacher_logits(
    mats: &[LogitMatrix],
    weights: &ImportanceWeights,
) -> Result<LogitMatrix> {
    let first = mats
        .first()
        .ok_or_else(|| Error::InvalidArgument("no logit matrices to aggregate".into()))?;
    let (n, classes) = (first.samples(), first.classes());
    if mats.iter().any(|m| m.samples() != n || m.classes() != classes) {
        return Err(Error::InvalidArgument(
            "logit matrices disagree on public-set size or class count".into(),
        ));
    }
    if weights.clients() != mats.len() || weights.classes() != classes {
        return Err(Error::InvalidArgument(format!(
            "importance weights are {}x{}, expected {}x{}",
            weights.classes(),
            weights.clients(),
            classes,
            mats.len()
        )));
    }

    let mut covered = BTreeSet::new();
    let mut data = vec![0.0f32; n * classes];
    for class in 0..classes {
        // Present clients: claim the class and carry importance for it.
        let present: Vec<(usize, f64)> = mats
            .iter()
            .enumerate()
            .filter(|(c, m)| m.coverage().contains(&class) && weights.weight(class, *c) > 0.0)
            .map(|(c, _)| (c, weights.weight(class, c)))
            .collect();
        let total: f64 = present.iter().map(|(_, w)| w).sum();
        if present.is_empty() || total <= 0.0 {
            continue;
        }
        covered.insert(class);
        for i in 0..n {
            let mut acc = 0.0f64;
            for &(c, w) in &present {
                let z = mats[c].get(i, class).expect("present client covers class") as f64;
                acc += w * z;
            }
            data[i * classes + class] = (acc / total) as f32;
        }
    }
    if covered.is_empty() {
        return Err(Error::NoCoveredClasses);
    }
    LogitMatrix::new(Tensor::new(vec![n, classes], data)?, covered)
}
