//! Alias method for O(1) weighted index sampling (Vose's variant).

use rand::Rng;

use crate::error::{Error, Result};

/// Precomputed alias table over a fixed weight vector.
///
/// Sampling returns index `k` with probability `w_k / Σ w`. Zero weights
/// are allowed (those indices are never returned); building fails when no
/// weight is positive.
#[derive(Debug, Clone)]
pub struct AliasTable {
    prob: Vec<f64>,
    alias: Vec<u32>,
}

impl AliasTable {
    pub fn new(weights: &[f64]) -> Result<Self> {
        let n = weights.len();
        let mut total = 0.0f64;
        for &w in weights {
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::Data(format!("invalid sampling weight {w}")));
            }
            total += w;
        }
        if n == 0 || total <= 0.0 {
            return Err(Error::Data("no positive sampling weight".into()));
        }

        let scale = n as f64 / total;
        let mut prob: Vec<f64> = weights.iter().map(|&w| w * scale).collect();
        let mut alias = vec![0u32; n];
        let mut small: Vec<u32> = Vec::new();
        let mut large: Vec<u32> = Vec::new();
        for (k, &p) in prob.iter().enumerate() {
            if p < 1.0 {
                small.push(k as u32);
            } else {
                large.push(k as u32);
            }
        }
        while let (Some(&s), Some(&l)) = (small.last(), large.last()) {
            small.pop();
            alias[s as usize] = l;
            let leftover = prob[l as usize] - (1.0 - prob[s as usize]);
            prob[l as usize] = leftover;
            if leftover < 1.0 {
                large.pop();
                small.push(l);
            }
        }
        // Leftover buckets (numerical residue) keep probability one.
        for &k in small.iter().chain(large.iter()) {
            prob[k as usize] = 1.0;
            alias[k as usize] = k;
        }
        Ok(Self { prob, alias })
    }

    pub fn len(&self) -> usize {
        self.prob.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prob.is_empty()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let k = rng.gen_range(0..self.prob.len());
        if rng.gen::<f64>() < self.prob[k] {
            k
        } else {
            self.alias[k] as usize
        }
    }
}
