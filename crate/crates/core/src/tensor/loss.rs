//! Mean binary cross-entropy over all entries, with the gradient w.r.t. the
//! predicted probabilities.

use super::Tensor;
use crate::error::{Error, Result};

pub const BCE_CLAMP: f64 = 1e-7;

/// Returns (loss, dloss/dpred). Predictions are clamped to
/// [BCE_CLAMP, 1 − BCE_CLAMP] before the logs; clamped entries get zero
/// gradient. Predictions outside [0, 1] (or non-finite) are an error, as are
/// targets that are not exactly 0 or 1.
pub fn bce_loss(pred: &Tensor, target: &Tensor) -> Result<(f64, Tensor)> {
    if pred.shape != target.shape {
        return Err(Error::shape(
            "bce_loss",
            format!("{:?}", pred.shape),
            format!("{:?}", target.shape),
        ));
    }
    if pred.numel() == 0 {
        return Err(Error::Data("bce_loss: empty prediction tensor".into()));
    }
    let n = pred.numel() as f64;
    let mut loss = 0.0;
    let mut grad = Tensor::zeros(&pred.shape);
    for (i, (&p, &y)) in pred.data.iter().zip(&target.data).enumerate() {
        if !p.is_finite() || !(0.0..=1.0).contains(&p) {
            return Err(Error::Numeric(format!("bce_loss: prediction {p} at index {i} outside [0, 1]")));
        }
        if y != 0.0 && y != 1.0 {
            return Err(Error::Data(format!("bce_loss: target {y} at index {i} is not 0 or 1")));
        }
        let clamped = p < BCE_CLAMP || p > 1.0 - BCE_CLAMP;
        let pc = p.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
        loss -= y * pc.ln() + (1.0 - y) * (1.0 - pc).ln();
        if !clamped {
            grad.data[i] = (pc - y) / (pc * (1.0 - pc)) / n;
        }
    }
    Ok((loss / n, grad))
}
