use alloc::format;
use alloc::vec;

use crate::error::{Error, Result};
use crate::tensor::Tensor4;

/// Mean softmax cross-entropy over a batch of logits shaped
/// `(batch, 1, 1, classes)`, and its gradient `(softmax − onehot) / batch`.
///
/// Each row is shifted by its maximum before exponentiation.
pub fn softmax_cross_entropy(logits: &Tensor4, labels: &[usize]) -> Result<(f64, Tensor4)> {
    let s = logits.shape();
    let classes = s.item_len();
    if labels.len() != s.batch {
        return Err(Error::Param(format!(
            "{} labels for a batch of {}",
            labels.len(),
            s.batch
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::Data(format!(
            "label {bad} out of range for {classes} classes"
        )));
    }

    let n = s.batch as f64;
    let mut grad = vec![0.0; s.len()];
    let mut total = 0.0;
    for ((row, g), &label) in logits
        .data()
        .chunks_exact(classes)
        .zip(grad.chunks_exact_mut(classes))
        .zip(labels)
    {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut denom = 0.0;
        for (gi, &z) in g.iter_mut().zip(row) {
            *gi = libm::exp(z - max);
            denom += *gi;
        }
        let log_denom = libm::log(denom);
        total += log_denom - (row[label] - max);
        for gi in g.iter_mut() {
            *gi /= denom * n;
        }
        g[label] -= 1.0 / n;
    }
    Ok((total / n, Tensor4::from_vec(s, grad)?))
}

/// Index of the largest logit in each row; ties resolve to the lowest index.
pub fn argmax_rows(logits: &Tensor4) -> alloc::vec::Vec<usize> {
    let classes = logits.shape().item_len();
    logits
        .data()
        .chunks_exact(classes)
        .map(|row| {
            let mut best = 0;
            for (k, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = k;
                }
            }
            best
        })
        .collect()
}
