//! Weighted Jaccard similarity.

use crate::error::{Error, Result};

/// Weighted Jaccard similarity of two nonnegative vectors:
/// `Σ_i min(v_i, u_i) / Σ_i max(v_i, u_i)`.
///
/// Returns an error when the vectors differ in length or are both all-zero
/// (the ratio is undefined).
pub fn weighted_jaccard(v: &[f64], u: &[f64]) -> Result<f64> {
    if v.len() != u.len() {
        return Err(Error::LengthMismatch {
            left: v.len(),
            right: u.len(),
        });
    }
    let (mut num, mut den) = (0.0f64, 0.0f64);
    for (&a, &b) in v.iter().zip(u) {
        num += a.min(b);
        den += a.max(b);
    }
    if den == 0.0 {
        return Err(Error::UndefinedSimilarity);
    }
    Ok(num / den)
}
