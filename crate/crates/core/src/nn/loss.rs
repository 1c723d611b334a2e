use super::{NnError, Tensor};
use crate::Scalar;

/// Max-shifted softmax over each row of a 2-D tensor.
pub fn softmax_rows<T: Scalar>(logits: &Tensor<T>) -> Tensor<T> {
    let mut p = logits.clone();
    let (rows, _) = logits.rows_cols();
    for r in 0..rows {
        let row = p.row_mut(r);
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let mut sum = T::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    p
}

/// Mean negative log-likelihood of `labels` under softmax(`logits`), and the probabilities.
pub fn softmax_cross_entropy<T: Scalar>(
    logits: &Tensor<T>,
    labels: &[usize],
) -> Result<(T, Tensor<T>), NnError> {
    let (rows, classes) = logits.rows_cols();
    if labels.len() != rows {
        return Err(NnError::ShapeMismatch {
            op: "softmax_cross_entropy",
            left: logits.shape().to_vec(),
            right: vec![labels.len()],
        });
    }
    if let Some((index, &label)) = labels.iter().enumerate().find(|(_, &l)| l >= classes) {
        return Err(NnError::LabelOutOfRange {
            index,
            label,
            classes,
        });
    }
    let mut total = T::zero();
    for (r, &label) in labels.iter().enumerate() {
        let row = logits.row(r);
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let lse = max + row.iter().map(|&v| (v - max).exp()).sum::<T>().ln();
        total += lse - row[label];
    }
    Ok((total / T::of(rows as f64), softmax_rows(logits)))
}

/// Gradient of the mean loss with respect to the logits: `(p − onehot) / b`.
pub fn softmax_cross_entropy_backward<T: Scalar>(probs: &Tensor<T>, labels: &[usize]) -> Tensor<T> {
    let (rows, _) = probs.rows_cols();
    let scale = T::one() / T::of(rows as f64);
    let mut d = probs.clone();
    for (r, &label) in labels.iter().enumerate() {
        let row = d.row_mut(r);
        row[label] -= T::one();
        for v in row.iter_mut() {
            *v *= scale;
        }
    }
    d
}
