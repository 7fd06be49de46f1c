use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Mean softmax cross-entropy over a `[n, k]` batch of logits, and its
/// gradient `(softmax - onehot) / n` with respect to the logits.
pub fn cross_entropy<T: Scalar>(logits: &[T], labels: &[usize], k: usize) -> Result<(T, Vec<T>)> {
    let n = labels.len();
    if k == 0 || logits.len() != n * k {
        return Err(Error::config(format!("logits of length {} do not form [{n}, {k}]", logits.len())));
    }
    if let Some(&label) = labels.iter().find(|&&l| l >= k) {
        return Err(Error::LabelOutOfRange { label, classes: k });
    }
    let inv_n = T::one() / T::from_usize_lossy(n.max(1));
    let mut loss = T::zero();
    let mut grad = vec![T::zero(); logits.len()];
    for ((row, g), &label) in logits.chunks_exact(k).zip(grad.chunks_exact_mut(k)).zip(labels) {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let mut sum = T::zero();
        for (gi, &z) in g.iter_mut().zip(row) {
            *gi = (z - max).exp();
            sum += *gi;
        }
        loss += sum.ln() + max - row[label];
        for gi in g.iter_mut() {
            *gi = *gi / sum * inv_n;
        }
        g[label] -= inv_n;
    }
    Ok((loss * inv_n, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits_give_log_k() {
        let (loss, grad) = cross_entropy(&[0.3f64; 12], &[0, 5], 6).unwrap();
        assert!((loss - 6f64.ln()).abs() < 1e-12);
        assert!((grad[0] - (1.0 / 6.0 - 1.0) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn large_margin_gives_vanishing_loss() {
        let (loss, _) = cross_entropy(&[20.0f64, 0.0, 0.0], &[0], 3).unwrap();
        assert!(loss < 1e-8 && loss > 0.0);
        let (big, _) = cross_entropy(&[1000.0f64, 0.0], &[1], 2).unwrap();
        assert!((big - 1000.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_labels() {
        assert!(matches!(cross_entropy(&[0.0f64; 4], &[0, 2], 2), Err(Error::LabelOutOfRange { label: 2, classes: 2 })));
        assert!(cross_entropy(&[0.0f64; 3], &[0, 1], 2).is_err());
    }
}
