//! Minibatch assembly: accumulate whole microbatches to the size target,
//! then match negatives.

use rand::{Rng, RngCore};

use crate::arrange::alias::AliasTable;
use crate::arrange::draw::MicrobatchSource;
use crate::arrange::types::{Designation, Microbatch, Minibatch};
use crate::data::AssociationMatrix;
use crate::error::Result;

/// Draws the shared negative entity sets: contexts proportionally to
/// column sums for focus updates, focus entities proportionally to row
/// sums for context updates.
pub struct NegativeSampler {
    col_alias: AliasTable,
    row_alias: AliasTable,
}

impl NegativeSampler {
    pub fn new(matrix: &AssociationMatrix) -> Result<Self> {
        Ok(Self {
            col_alias: AliasTable::new(matrix.col_sums())?,
            row_alias: AliasTable::new(matrix.row_sums())?,
        })
    }

    pub fn draw_entities<R: Rng + ?Sized>(
        &self,
        designation: Designation,
        count: usize,
        rng: &mut R,
    ) -> Vec<u32> {
        let alias = match designation {
            Designation::Focus => &self.col_alias,
            Designation::Context => &self.row_alias,
        };
        (0..count).map(|_| alias.sample(rng) as u32).collect()
    }
}

/// Accumulate microbatches until at least `b` positives are present
/// (microbatches are never truncated, so the total may overshoot), then
/// draw `lambda` negative entities i.i.d. and pair every positive with
/// every negative entity.
pub fn build_minibatch<R: Rng>(
    source: &mut dyn MicrobatchSource,
    negatives: &NegativeSampler,
    b: usize,
    lambda: usize,
    designation: Designation,
    rng: &mut R,
) -> Minibatch {
    assert!(b >= 1, "minibatch size must be at least 1");
    let mut positives: Vec<(u32, u32)> = Vec::with_capacity(b);
    while positives.len() < b {
        let mb: Microbatch = source.next(designation, rng as &mut dyn RngCore);
        debug_assert_eq!(mb.designation, designation);
        debug_assert!(
            !mb.is_empty(),
            "microbatch sources must not produce empty draws"
        );
        positives.extend_from_slice(&mb.positives);
    }
    let negative_entities = negatives.draw_entities(designation, lambda, rng);
    Minibatch {
        designation,
        positives,
        negative_entities,
    }
}
