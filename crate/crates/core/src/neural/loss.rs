use super::graph::softmax;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Stable softmax cross-entropy: returns `(−ln p[target], p)`.
pub fn softmax_xent<S: Scalar>(logits: &[S], target: usize) -> Result<(S, Vec<S>)> {
    if target >= logits.len() {
        return Err(Error::TargetOutOfRange {
            index: target,
            len: logits.len(),
        });
    }
    if !logits.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("softmax_xent logits".into()));
    }
    let max = logits.iter().copied().fold(S::neg_infinity(), S::max);
    let lse = max + logits.iter().map(|&x| (x - max).exp()).sum::<S>().ln();
    Ok((lse - logits[target], softmax(logits)))
}
