//! Confidence-weighted dense field objective
//! `L = sum(gamma * sigma * |y - y_hat|^2 - alpha * log(sigma))`,
//! where `y` stacks `(u_x, u_y, latitude)` per sample.

use thiserror::Error;

use crate::field::PerspectiveField;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ObjectiveError {
    #[error("{pred} predicted fields but {gt} ground-truth fields")]
    CountMismatch { pred: usize, gt: usize },
    #[error("view {0}: predicted and ground-truth grids differ")]
    GridMismatch(usize),
    #[error("view {view}, sample {sample}: confidence {sigma} must be positive")]
    NonPositiveConfidence { view: usize, sample: usize, sigma: f64 },
}

/// Evaluates the objective over samples valid in both fields. Confidence is
/// taken from the predicted fields (1 when absent).
pub fn confidence_objective(
    pred: &[PerspectiveField],
    gt: &[PerspectiveField],
    gamma: f64,
    alpha: f64,
) -> Result<f64, ObjectiveError> {
    if pred.len() != gt.len() {
        return Err(ObjectiveError::CountMismatch {
            pred: pred.len(),
            gt: gt.len(),
        });
    }
    let mut loss = 0.0;
    for (view, (p, t)) in pred.iter().zip(gt).enumerate() {
        if !p.same_sampling(t) || p.len() != t.len() {
            return Err(ObjectiveError::GridMismatch(view));
        }
        for i in 0..p.len() {
            if !(p.valid[i] && t.valid[i]) {
                continue;
            }
            let sigma = p.weight(i);
            if !(sigma > 0.0) {
                return Err(ObjectiveError::NonPositiveConfidence { view, sample: i, sigma });
            }
            let du = p.up[i] - t.up[i];
            let dl = p.latitude[i] - t.latitude[i];
            let sq = du.norm_squared() + dl * dl;
            loss += gamma * sigma * sq - alpha * sigma.ln();
        }
    }
    Ok(loss)
}
