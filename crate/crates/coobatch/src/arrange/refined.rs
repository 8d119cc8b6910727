//! Coordinated sources with LSH or oracle refinement.
//!
//! A refined draw takes one coordinated microbatch, partitions it, and
//! hands the parts out as successive microbatches. Parts are buffered per
//! designation and, by default, consumed in random order within the draw.

use rand::seq::SliceRandom;
use rand::{Rng, RngCore};

use crate::arrange::draw::{CooSource, MicrobatchSource};
use crate::arrange::lsh::{adaptive_refine, oracle_refine, refine, LshPool};
use crate::arrange::schedule::MapPolicy;
use crate::arrange::types::{Designation, Microbatch};
use crate::error::{Error, Result};

enum RefineKind<'a> {
    Lsh {
        focus_pool: &'a LshPool,
        context_pool: &'a LshPool,
        policy: MapPolicy,
        /// Cap used when the adaptive policy does not name one.
        default_cap: usize,
    },
    Oracle {
        focus_labels: &'a [u32],
        context_labels: &'a [u32],
    },
}

/// A coordinated microbatch stream refined by key maps or block labels.
pub struct RefinedCooSource<'a> {
    coo: CooSource<'a>,
    kind: RefineKind<'a>,
    shuffle_parts: bool,
    focus_buffer: Vec<Microbatch>,
    context_buffer: Vec<Microbatch>,
    oversize_parts: u64,
}

impl<'a> RefinedCooSource<'a> {
    pub fn with_lsh(
        coo: CooSource<'a>,
        focus_pool: &'a LshPool,
        context_pool: &'a LshPool,
        policy: MapPolicy,
        default_cap: usize,
        shuffle_parts: bool,
    ) -> Result<Self> {
        if focus_pool.is_empty() || context_pool.is_empty() {
            return Err(Error::Config("LSH map pool is empty".into()));
        }
        if let MapPolicy::Static(r) = policy {
            if r > focus_pool.len() || r > context_pool.len() {
                return Err(Error::Config(format!(
                    "static policy wants {r} maps but the pool is smaller"
                )));
            }
        }
        Ok(Self {
            coo,
            kind: RefineKind::Lsh {
                focus_pool,
                context_pool,
                policy,
                default_cap,
            },
            shuffle_parts,
            focus_buffer: Vec::new(),
            context_buffer: Vec::new(),
            oversize_parts: 0,
        })
    }

    pub fn with_oracle(
        coo: CooSource<'a>,
        focus_labels: &'a [u32],
        context_labels: &'a [u32],
        shuffle_parts: bool,
    ) -> Self {
        Self {
            coo,
            kind: RefineKind::Oracle {
                focus_labels,
                context_labels,
            },
            shuffle_parts,
            focus_buffer: Vec::new(),
            context_buffer: Vec::new(),
            oversize_parts: 0,
        }
    }

    /// Parts left above the adaptive cap because the map pool ran out.
    pub fn oversize_parts(&self) -> u64 {
        self.oversize_parts
    }

    fn refill<R: Rng + ?Sized>(&mut self, designation: Designation, rng: &mut R) {
        let mb = self.coo.draw(designation, rng);
        let mut parts = match &self.kind {
            RefineKind::Lsh {
                focus_pool,
                context_pool,
                policy,
                default_cap,
            } => {
                let pool = match designation {
                    Designation::Focus => focus_pool,
                    Designation::Context => context_pool,
                };
                match policy {
                    MapPolicy::Static(r) => {
                        let chosen: Vec<&crate::arrange::lsh::LshMap> =
                            pool.maps.choose_multiple(rng, *r).collect();
                        refine(&mb, &chosen)
                    }
                    MapPolicy::Adaptive(cap) => {
                        let cap = cap.unwrap_or(*default_cap).max(1);
                        let (parts, oversize) = adaptive_refine(&mb, &pool.maps, cap, rng);
                        self.oversize_parts += oversize as u64;
                        parts
                    }
                }
            }
            RefineKind::Oracle {
                focus_labels,
                context_labels,
            } => {
                let labels = match designation {
                    Designation::Focus => focus_labels,
                    Designation::Context => context_labels,
                };
                // Label coverage is validated at construction sites; an
                // unlabeled entity here is a programming error.
                oracle_refine(&mb, labels).expect("labels must cover the axis")
            }
        };
        if self.shuffle_parts {
            parts.shuffle(rng);
        } else {
            parts.reverse();
        }
        match designation {
            Designation::Focus => self.focus_buffer = parts,
            Designation::Context => self.context_buffer = parts,
        }
    }
}

impl MicrobatchSource for RefinedCooSource<'_> {
    fn next(&mut self, designation: Designation, rng: &mut dyn RngCore) -> Microbatch {
        loop {
            let buffer = match designation {
                Designation::Focus => &mut self.focus_buffer,
                Designation::Context => &mut self.context_buffer,
            };
            if let Some(part) = buffer.pop() {
                return part;
            }
            self.refill(designation, rng);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::AssociationMatrix;
    use crate::rng;
    use std::collections::HashMap;

    fn block_matrix() -> (AssociationMatrix, Vec<u32>) {
        // Two 3x3 blocks on the diagonal of a 6x6 binary matrix.
        let mut triples = Vec::new();
        for b in 0..2u32 {
            for i in 0..3u32 {
                for j in 0..3u32 {
                    triples.push((b * 3 + i, b * 3 + j, 1.0));
                }
            }
        }
        // Light cross-block noise keeps columns mixed.
        triples.push((0, 4, 1.0));
        triples.push((5, 1, 1.0));
        let labels = vec![0, 0, 0, 1, 1, 1];
        (
            AssociationMatrix::from_triples(6, 6, triples).unwrap(),
            labels,
        )
    }

    #[test]
    fn oracle_refined_parts_are_label_pure() {
        let (m, labels) = block_matrix();
        let coo = CooSource::new(&m).unwrap();
        let mut src = RefinedCooSource::with_oracle(coo, &labels, &labels, true);
        let mut rng = rng::stream(31, "refined-oracle");
        for _ in 0..2000 {
            let part = src.next(Designation::Focus, &mut rng);
            let part_labels: Vec<u32> = part
                .positives
                .iter()
                .map(|&(i, _)| labels[i as usize])
                .collect();
            assert!(part_labels.windows(2).all(|w| w[0] == w[1]));
        }
    }

    #[test]
    fn refined_stream_preserves_marginals() {
        // Refinement reorders positives into parts but never drops or
        // duplicates them, so per-pair inclusion frequencies stay
        // proportional to the weights.
        let (m, labels) = block_matrix();
        let coo = CooSource::new(&m).unwrap();
        let mut refined = RefinedCooSource::with_oracle(coo, &labels, &labels, true);
        let plain = CooSource::new(&m).unwrap();

        let mut rng_a = rng::stream(32, "refined-marginals");
        let mut rng_b = rng::stream(33, "plain-marginals");
        let draws = 200_000usize;
        let mut refined_counts: HashMap<(u32, u32), u64> = HashMap::new();
        let mut plain_counts: HashMap<(u32, u32), u64> = HashMap::new();
        let mut refined_total = 0u64;
        let mut plain_total = 0u64;
        while refined_total < draws as u64 {
            let part = src_next(&mut refined, &mut rng_a);
            for &p in &part.positives {
                *refined_counts.entry(p).or_default() += 1;
            }
            refined_total += part.positives.len() as u64;
        }
        while plain_total < draws as u64 {
            let mb = plain.draw(Designation::Focus, &mut rng_b);
            for &p in &mb.positives {
                *plain_counts.entry(p).or_default() += 1;
            }
            plain_total += mb.positives.len() as u64;
        }
        for e in m.entries() {
            let pair = (e.focus, e.context);
            let fr = *refined_counts.get(&pair).unwrap_or(&0) as f64 / refined_total as f64;
            let fp = *plain_counts.get(&pair).unwrap_or(&0) as f64 / plain_total as f64;
            assert!(
                (fr - fp).abs() < 0.01,
                "pair {pair:?}: refined {fr} vs plain {fp}"
            );
        }
    }

    fn src_next(src: &mut RefinedCooSource<'_>, rng: &mut rand_chacha::ChaCha8Rng) -> Microbatch {
        src.next(Designation::Focus, rng)
    }

    #[test]
    fn adaptive_lsh_respects_the_cap() {
        let (m, _) = block_matrix();
        let mut pool_rng = rng::stream(34, "refined-pool");
        let fp = LshPool::build_jaccard(&m, Designation::Focus, 8, &mut pool_rng).unwrap();
        let cp = LshPool::build_jaccard(&m, Designation::Context, 8, &mut pool_rng).unwrap();
        let coo = CooSource::new(&m).unwrap();
        let mut src =
            RefinedCooSource::with_lsh(coo, &fp, &cp, MapPolicy::Adaptive(Some(2)), 64, true)
                .unwrap();
        let mut rng = rng::stream(35, "refined-adaptive");
        for _ in 0..2000 {
            let part = src.next(Designation::Focus, &mut rng);
            assert!(part.len() <= 2 || src.oversize_parts() > 0);
        }
    }
}
