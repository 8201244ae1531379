use serde::{Deserialize, Serialize};

use super::tensor::{Real, Tensor};
use crate::error::{Error, Result};

/// Probabilities are clamped to `[BCE_CLAMP, 1 - BCE_CLAMP]` before the log.
pub const BCE_CLAMP: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// Binary cross-entropy on a `[B, 1]` sigmoid output.
    Bce,
    /// Softmax cross-entropy on `[B, C]` logits.
    SoftmaxCe,
}

impl LossKind {
    /// Mean loss over the batch and its gradient with respect to `output`.
    pub fn evaluate<T: Real>(&self, output: &Tensor<T>, labels: &[u8]) -> Result<(T, Tensor<T>)> {
        match self {
            LossKind::Bce => {
                let targets: Vec<T> = labels.iter().map(|&l| T::of(l as f64)).collect();
                bce(output, &targets)
            }
            LossKind::SoftmaxCe => {
                let targets: Vec<usize> = labels.iter().map(|&l| l as usize).collect();
                softmax_ce(output, &targets)
            }
        }
    }

    /// Class decisions: threshold 0.5 for sigmoid output, argmax for logits.
    pub fn predict<T: Real>(&self, output: &Tensor<T>) -> Vec<u8> {
        match self {
            LossKind::Bce => output
                .data()
                .iter()
                .map(|p| u8::from(*p > T::of(0.5)))
                .collect(),
            LossKind::SoftmaxCe => {
                let classes = *output.shape().last().unwrap_or(&1);
                output
                    .data()
                    .chunks_exact(classes)
                    .map(|row| {
                        let mut best = 0;
                        for (i, v) in row.iter().enumerate() {
                            if *v > row[best] {
                                best = i;
                            }
                        }
                        best as u8
                    })
                    .collect()
            }
        }
    }
}

/// `-mean(y ln p + (1 - y) ln(1 - p))` with clamped `p`.
pub fn bce<T: Real>(probs: &Tensor<T>, targets: &[T]) -> Result<(T, Tensor<T>)> {
    let batch = targets.len();
    if probs.len() != batch || batch == 0 {
        return Err(Error::Shape(format!(
            "bce: {} predictions for {batch} targets",
            probs.len()
        )));
    }
    let lo = T::of(BCE_CLAMP);
    let hi = T::one() - lo;
    let n = T::of(batch as f64);
    let mut loss = T::zero();
    let mut grad = Tensor::zeros(probs.shape());
    for ((p, y), g) in probs.data().iter().zip(targets).zip(grad.data_mut()) {
        let pc = p.max(lo).min(hi);
        loss -= *y * pc.ln() + (T::one() - *y) * (T::one() - pc).ln();
        if *p > lo && *p < hi {
            *g = (-*y / pc + (T::one() - *y) / (T::one() - pc)) / n;
        }
    }
    Ok((loss / n, grad))
}

/// Mean cross-entropy of softmax(logits) against class indices, via
/// log-sum-exp.
pub fn softmax_ce<T: Real>(logits: &Tensor<T>, targets: &[usize]) -> Result<(T, Tensor<T>)> {
    let &[batch, classes] = logits.shape() else {
        return Err(Error::Shape(format!(
            "softmax_ce expects [B, C] logits, got {:?}",
            logits.shape()
        )));
    };
    if targets.len() != batch || batch == 0 || targets.iter().any(|&t| t >= classes) {
        return Err(Error::Shape(format!(
            "softmax_ce: bad targets for [{batch}, {classes}] logits"
        )));
    }
    let n = T::of(batch as f64);
    let mut loss = T::zero();
    let mut grad = Tensor::zeros(logits.shape());
    for ((row, &y), g) in logits
        .data()
        .chunks_exact(classes)
        .zip(targets)
        .zip(grad.data_mut().chunks_exact_mut(classes))
    {
        let m = row.iter().copied().fold(T::neg_infinity(), T::max);
        let sum: T = row.iter().map(|z| (*z - m).exp()).sum();
        let lse = m + sum.ln();
        loss += lse - row[y];
        for (c, (gz, z)) in g.iter_mut().zip(row).enumerate() {
            let p = (*z - lse).exp();
            let target = if c == y { T::one() } else { T::zero() };
            *gz = (p - target) / n;
        }
    }
    Ok((loss / n, grad))
}
