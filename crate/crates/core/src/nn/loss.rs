//! Classification loss.

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// Mean cross-entropy over the batch, with the gradient w.r.t. the logits.
///
/// Uses the log-sum-exp trick; gradient is `(softmax - onehot) / N`.
pub fn cross_entropy<S: Scalar>(logits: &Tensor<S>, labels: &[u32]) -> Result<(f64, Tensor<S>)> {
    let [n, t] = match logits.shape() {
        [n, t] => [*n, *t],
        other => {
            return Err(Error::InvalidArgument(format!(
                "cross_entropy expects [N,T] logits, got {other:?}"
            )))
        }
    };
    if labels.len() != n {
        return Err(Error::InvalidArgument(format!(
            "{} labels for a batch of {n}",
            labels.len()
        )));
    }
    let mut grad = Tensor::zeros(vec![n, t]);
    let g = grad.data_mut();
    let z = logits.data();
    let inv_n = 1.0 / n as f64;
    let mut total = 0.0f64;
    for i in 0..n {
        let label = labels[i] as usize;
        if label >= t {
            return Err(Error::Data(format!(
                "label {label} out of range for {t} classes (sample {i})"
            )));
        }
        let row = &z[i * t..(i + 1) * t];
        let max = row.iter().fold(f64::NEG_INFINITY, |m, v| m.max(v.to_f64()));
        let sum_exp: f64 = row.iter().map(|v| (v.to_f64() - max).exp()).sum();
        let lse = max + sum_exp.ln();
        total += lse - row[label].to_f64();
        for j in 0..t {
            let softmax = (row[j].to_f64() - max).exp() / sum_exp;
            let onehot = if j == label { 1.0 } else { 0.0 };
            g[i * t + j] = S::from_f64((softmax - onehot) * inv_n);
        }
    }
    Ok((total * inv_n, grad))
}

/// Top-1 accuracy of logits against labels. Ties resolve to the lowest index.
pub fn accuracy<S: Scalar>(logits: &Tensor<S>, labels: &[u32]) -> f64 {
    let (n, t) = (logits.shape()[0], logits.shape()[1]);
    if n == 0 {
        return 0.0;
    }
    let z = logits.data();
    let mut hits = 0usize;
    for i in 0..n {
        let row = &z[i * t..(i + 1) * t];
        let mut best = 0usize;
        for j in 1..t {
            if row[j] > row[best] {
                best = j;
            }
        }
        if best == labels[i] as usize {
            hits += 1;
        }
    }
    hits as f64 / n as f64
}
