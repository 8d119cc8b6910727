//! Train/test splitting of an association matrix.
//!
//! Held-out positives are a weighted sample without replacement of the
//! nonzero entries, drawn with probabilities proportional to the entry
//! weights via exponential race keys (equivalent to sequentially drawing
//! an entry proportionally to weight and removing it). Negatives are
//! distinct zero entries drawn uniformly.

use std::collections::HashSet;

use rand::Rng;

use crate::data::AssociationMatrix;
use crate::error::{Error, Result};
use crate::rng;

/// A train matrix plus held-out positive and negative test pairs.
#[derive(Debug)]
pub struct TestSplit {
    pub train: AssociationMatrix,
    /// Held-out positive pairs in selection order.
    pub positives: Vec<(u32, u32)>,
    /// Zero-entry pairs of the original matrix.
    pub negatives: Vec<(u32, u32)>,
    pub seed: u64,
}

/// Split `matrix` by holding out `fraction` of the nonzero entries.
///
/// `n_negatives` defaults to the held-out positive count.
pub fn split_train_test(
    matrix: &AssociationMatrix,
    fraction: f64,
    n_negatives: Option<usize>,
    seed: u64,
) -> Result<TestSplit> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Config(format!(
            "held-out fraction {fraction} outside (0, 1)"
        )));
    }
    let nnz = matrix.nnz();
    let k = (fraction * nnz as f64).round() as usize;
    if k == 0 {
        return Err(Error::Config(format!(
            "fraction {fraction} of {nnz} entries rounds to zero"
        )));
    }

    // Exponential race: entry with the smallest u/weight is the first pick.
    let mut key_rng = rng::stream(seed, "split-positives");
    let mut keyed: Vec<(f64, u32)> = matrix
        .entries()
        .iter()
        .enumerate()
        .map(|(id, e)| {
            let u: f64 = key_rng.gen();
            let exp = -(-u).ln_1p(); // Exp(1) from uniform [0, 1)
            (exp / e.weight, id as u32)
        })
        .collect();
    keyed.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    let held: Vec<u32> = keyed[..k].iter().map(|&(_, id)| id).collect();

    let held_set: HashSet<u32> = held.iter().copied().collect();
    let positives: Vec<(u32, u32)> = held
        .iter()
        .map(|&id| {
            let e = matrix.entry(id);
            (e.focus, e.context)
        })
        .collect();

    let train_triples: Vec<(u32, u32, f64)> = matrix
        .entries()
        .iter()
        .enumerate()
        .filter(|(id, _)| !held_set.contains(&(*id as u32)))
        .map(|(_, e)| (e.focus, e.context, e.weight))
        .collect();
    if train_triples.is_empty() {
        return Err(Error::Data("split leaves an empty train matrix".into()));
    }
    let train =
        AssociationMatrix::from_triples(matrix.n_focus(), matrix.n_context(), train_triples)?;

    let want_neg = n_negatives.unwrap_or(k);
    let zero_cells = matrix.n_focus() * matrix.n_context() - nnz;
    if want_neg > zero_cells {
        return Err(Error::Data(format!(
            "requested {want_neg} negative pairs but only {zero_cells} zero entries exist"
        )));
    }
    let mut neg_rng = rng::stream(seed, "split-negatives");
    let mut negatives = Vec::with_capacity(want_neg);
    let mut seen: HashSet<(u32, u32)> = HashSet::new();
    let mut attempts: u64 = 0;
    let attempt_cap = 1000 * want_neg.max(1) as u64;
    while negatives.len() < want_neg {
        attempts += 1;
        if attempts > attempt_cap {
            return Err(Error::Data(
                "could not sample enough distinct zero entries".into(),
            ));
        }
        let i = neg_rng.gen_range(0..matrix.n_focus() as u32);
        let j = neg_rng.gen_range(0..matrix.n_context() as u32);
        if matrix.get(i, j).is_none() && seen.insert((i, j)) {
            negatives.push((i, j));
        }
    }

    Ok(TestSplit {
        train,
        positives,
        negatives,
        seed,
    })
}
