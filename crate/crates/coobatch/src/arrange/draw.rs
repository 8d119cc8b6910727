//! Microbatch generators for the independent and coordinated distributions.
//!
//! Both distributions place each positive example with the same marginal
//! frequency (proportional to its weight); they differ only in which
//! examples appear together. An independent draw is a single pair chosen
//! proportionally to weight. A coordinated focus draw picks a context
//! column proportionally to its maximum entry and returns every entry of
//! the column whose weight clears a shared uniform threshold, so heavier
//! corresponding examples are always co-placed.

use rand::{Rng, RngCore};

use crate::arrange::alias::AliasTable;
use crate::arrange::types::{Designation, Microbatch};
use crate::data::AssociationMatrix;
use crate::error::Result;

/// A stream of microbatches. Draws are i.i.d. conditioned on the
/// designation; sources with internal refinement buffer parts per
/// designation.
pub trait MicrobatchSource {
    fn next(&mut self, designation: Designation, rng: &mut dyn RngCore) -> Microbatch;
}

/// Independent arrangement: singleton microbatches drawn proportionally
/// to entry weight.
pub struct IndSource<'a> {
    matrix: &'a AssociationMatrix,
    entry_alias: AliasTable,
}

impl<'a> IndSource<'a> {
    pub fn new(matrix: &'a AssociationMatrix) -> Result<Self> {
        let weights: Vec<f64> = matrix.entries().iter().map(|e| e.weight).collect();
        Ok(Self {
            matrix,
            entry_alias: AliasTable::new(&weights)?,
        })
    }

    pub fn draw<R: Rng + ?Sized>(&self, designation: Designation, rng: &mut R) -> Microbatch {
        let e = self.matrix.entry(self.entry_alias.sample(rng) as u32);
        Microbatch {
            designation,
            positives: vec![(e.focus, e.context)],
        }
    }
}

impl MicrobatchSource for IndSource<'_> {
    fn next(&mut self, designation: Designation, rng: &mut dyn RngCore) -> Microbatch {
        self.draw(designation, rng)
    }
}

/// Coordinated arrangement: a focus draw picks context `j` proportionally
/// to the column maximum `M_j`, draws `u` uniform on `(0, 1]`, and returns
/// all entries of column `j` with weight at least `u * M_j`. The column
/// argmax always qualifies, so the microbatch is never empty. Context
/// draws are symmetric on rows.
pub struct CooSource<'a> {
    matrix: &'a AssociationMatrix,
    col_max_alias: AliasTable,
    row_max_alias: AliasTable,
}

impl<'a> CooSource<'a> {
    pub fn new(matrix: &'a AssociationMatrix) -> Result<Self> {
        Ok(Self {
            matrix,
            col_max_alias: AliasTable::new(matrix.col_maxima())?,
            row_max_alias: AliasTable::new(matrix.row_maxima())?,
        })
    }

    pub fn draw<R: Rng + ?Sized>(&self, designation: Designation, rng: &mut R) -> Microbatch {
        // u on the half-open interval (0, 1]; at u = 1 only the maxima stay.
        match designation {
            Designation::Focus => {
                let j = self.col_max_alias.sample(rng) as u32;
                let u = 1.0 - rng.gen::<f64>();
                let positives = self
                    .matrix
                    .column_threshold_set(j, u)
                    .map(|e| (e.focus, e.context))
                    .collect();
                Microbatch {
                    designation,
                    positives,
                }
            }
            Designation::Context => {
                let i = self.row_max_alias.sample(rng) as u32;
                let u = 1.0 - rng.gen::<f64>();
                let positives = self
                    .matrix
                    .row_threshold_set(i, u)
                    .map(|e| (e.focus, e.context))
                    .collect();
                Microbatch {
                    designation,
                    positives,
                }
            }
        }
    }
}

impl MicrobatchSource for CooSource<'_> {
    fn next(&mut self, designation: Designation, rng: &mut dyn RngCore) -> Microbatch {
        self.draw(designation, rng)
    }
}
