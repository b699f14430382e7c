use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Matrix;

/// Floor applied to `p(y_s)` before taking the log.
pub const PROB_FLOOR: f64 = 1e-12;

/// Default weight of the auxiliary smooth-L1 term.
pub const DEFAULT_SMOOTH_L1_WEIGHT: f64 = 0.1;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LossKind {
    #[default]
    CrossEntropy,
    /// Cross-entropy plus `weight` times the Huber (δ = 1) distance between
    /// the one-hot label and the predicted distribution.
    CrossEntropyPlusSmoothL1 { weight: f64 },
}

pub(crate) fn huber(e: f64) -> f64 {
    if e.abs() < 1.0 {
        0.5 * e * e
    } else {
        e.abs() - 0.5
    }
}

pub(crate) fn huber_grad(e: f64) -> f64 {
    if e.abs() < 1.0 {
        e
    } else {
        e.signum()
    }
}

pub(crate) fn check_labels(probs: &Matrix, labels: &[usize]) -> Result<()> {
    if probs.rows() != labels.len() {
        return Err(Error::shape(format!(
            "{} predictions for {} labels",
            probs.rows(),
            labels.len()
        )));
    }
    if let Some((s, &y)) = labels.iter().enumerate().find(|(_, &y)| y >= probs.cols()) {
        return Err(Error::invalid(format!(
            "label {y} of subject {s} is outside 0..{}",
            probs.cols()
        )));
    }
    Ok(())
}

/// Mean loss over the subjects (rows) of `probs`.
pub fn loss(probs: &Matrix, labels: &[usize], kind: LossKind) -> Result<f64> {
    check_labels(probs, labels)?;
    let s = labels.len() as f64;
    let ce = labels
        .iter()
        .enumerate()
        .map(|(i, &y)| -probs.get(i, y).max(PROB_FLOOR).ln())
        .sum::<f64>()
        / s;
    match kind {
        LossKind::CrossEntropy => Ok(ce),
        LossKind::CrossEntropyPlusSmoothL1 { weight } => {
            let mut aux = 0.0;
            for (i, &y) in labels.iter().enumerate() {
                for k in 0..probs.cols() {
                    let target = if k == y { 1.0 } else { 0.0 };
                    aux += huber(target - probs.get(i, k));
                }
            }
            Ok(ce + weight * aux / s)
        }
    }
}
