use super::tensor::{Scalar, Tensor};
use crate::error::{Error, Result};

/// Max-subtracted softmax.
pub fn softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = logits.iter().map(|&v| (v - max).exp()).collect();
    let sum: T = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// `-log softmax(logits)[label]` and its gradient `softmax - onehot(label)`.
pub fn softmax_cross_entropy<T: Scalar>(logits: &[T], label: usize) -> Result<(T, Vec<T>)> {
    if label >= logits.len() {
        return Err(Error::Shape(format!(
            "label {label} outside {} classes",
            logits.len()
        )));
    }
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let sum: T = logits.iter().map(|&v| (v - max).exp()).sum();
    let log_z = sum.ln() + max;
    let loss = log_z - logits[label];
    let mut grad: Vec<T> = logits.iter().map(|&v| (v - log_z).exp()).collect();
    grad[label] = grad[label] - T::one();
    Ok((loss, grad))
}

/// Cross-entropy summed over every pixel of a `[n, rows, cols]` logit map.
///
/// Pixels are visited in row-major order and each contributes exactly the
/// value of [`softmax_cross_entropy`] at that pixel, added to a running
/// total in that order.
pub fn pixelwise_cross_entropy<T: Scalar>(logit_map: &Tensor<T>, labels: &[u8]) -> Result<(T, Tensor<T>)> {
    let (n, h, w) = logit_map.chw()?;
    if labels.len() != h * w {
        return Err(Error::Shape(format!(
            "label map has {} pixels, logits have {}",
            labels.len(),
            h * w
        )));
    }
    let plane = h * w;
    let data = logit_map.data();
    let mut grad = Tensor::zeros(&[n, h, w]);
    let mut total = T::zero();
    let mut px = vec![T::zero(); n];
    for (p, &label) in labels.iter().enumerate() {
        for (k, v) in px.iter_mut().enumerate() {
            *v = data[k * plane + p];
        }
        let (loss, g) = softmax_cross_entropy(&px, label as usize)?;
        total = total + loss;
        let gd = grad.data_mut();
        for (k, gv) in g.into_iter().enumerate() {
            gd[k * plane + p] = gv;
        }
    }
    Ok((total, grad))
}
