//! Stochastic blocks data generator.
//!
//! The matrix is square. Rows and columns are partitioned into `blocks`
//! consecutive groups of equal size; the i-th row group and i-th column
//! group form one block. Interactions are drawn one at a time: a uniform
//! row, then with probability `in_block` a uniform column inside the row's
//! block and otherwise a uniform column outside it. Each draw increments
//! the association count, so the finished matrix satisfies `Σ κ = interactions`.

use rand::Rng;

use crate::data::AssociationMatrix;
use crate::error::{Error, Result};
use crate::rng;

/// Parameters of the stochastic blocks generator.
#[derive(Debug, Clone)]
pub struct BlocksConfig {
    /// Side of the square matrix.
    pub n: usize,
    /// Number of equal-size blocks; must divide `n`.
    pub blocks: usize,
    /// Number of interaction draws.
    pub interactions: u64,
    /// Probability that a draw stays inside the row's block.
    pub in_block: f64,
    pub seed: u64,
}

impl BlocksConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.blocks == 0 || !self.n.is_multiple_of(self.blocks) {
            return Err(Error::Config(format!(
                "blocks ({}) must divide n ({})",
                self.blocks, self.n
            )));
        }
        if !(0.0..=1.0).contains(&self.in_block) {
            return Err(Error::Config(format!(
                "in-block probability {} outside [0, 1]",
                self.in_block
            )));
        }
        if self.interactions == 0 {
            return Err(Error::Config("interactions must be at least 1".into()));
        }
        Ok(())
    }

    pub fn block_size(&self) -> usize {
        self.n / self.blocks
    }

    /// Ground-truth block label of a row or column id.
    pub fn block_of(&self, id: u32) -> u32 {
        id / self.block_size() as u32
    }

    /// Labels for all `n` entities on either axis.
    pub fn labels(&self) -> Vec<u32> {
        (0..self.n as u32).map(|i| self.block_of(i)).collect()
    }
}

/// Sample ground-truth test pairs for blocks data: positives are
/// same-block (focus, context) pairs, negatives cross-block pairs.
/// Deterministic per seed.
#[allow(clippy::type_complexity)]
pub fn sample_block_pairs(
    cfg: &BlocksConfig,
    positives: usize,
    negatives: usize,
    seed: u64,
) -> (Vec<(u32, u32)>, Vec<(u32, u32)>) {
    let mut rng = rng::stream(seed, "block-test-pairs");
    let n = cfg.n as u32;
    let bs = cfg.block_size() as u32;
    let mut pos = Vec::with_capacity(positives);
    while pos.len() < positives {
        let i = rng.gen_range(0..n);
        let j = (i / bs) * bs + rng.gen_range(0..bs);
        pos.push((i, j));
    }
    let mut neg = Vec::with_capacity(negatives);
    while neg.len() < negatives {
        let i = rng.gen_range(0..n);
        let j = rng.gen_range(0..n);
        if cfg.block_of(i) != cfg.block_of(j) {
            neg.push((i, j));
        }
    }
    (pos, neg)
}

/// Generate a stochastic blocks association matrix.
pub fn generate_blocks(cfg: &BlocksConfig) -> Result<AssociationMatrix> {
    cfg.validate()?;
    let n = cfg.n as u64;
    let bs = cfg.block_size() as u64;
    let mut rng = rng::stream(cfg.seed, "blocks-data");

    // Accumulate draws as packed codes, then run-length encode.
    let mut codes: Vec<u64> = Vec::with_capacity(cfg.interactions as usize);
    for _ in 0..cfg.interactions {
        let i = rng.gen_range(0..n);
        let block_start = (i / bs) * bs;
        // With a single block there is no outside; every draw stays in-block.
        let j = if cfg.blocks == 1 || rng.gen::<f64>() < cfg.in_block {
            block_start + rng.gen_range(0..bs)
        } else {
            let out = rng.gen_range(0..n - bs);
            if out >= block_start {
                out + bs
            } else {
                out
            }
        };
        codes.push(i * n + j);
    }
    codes.sort_unstable();

    let mut triples: Vec<(u32, u32, f64)> = Vec::new();
    let mut run_start = 0usize;
    for k in 1..=codes.len() {
        if k == codes.len() || codes[k] != codes[run_start] {
            let code = codes[run_start];
            triples.push(((code / n) as u32, (code % n) as u32, (k - run_start) as f64));
            run_start = k;
        }
    }
    AssociationMatrix::from_triples(cfg.n, cfg.n, triples)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn p_one_forces_in_block() {
        let cfg = BlocksConfig {
            n: 4,
            blocks: 2,
            interactions: 10,
            in_block: 1.0,
            seed: 1,
        };
        let m = generate_blocks(&cfg).unwrap();
        assert_eq!(m.total(), 10.0);
        for e in m.entries() {
            assert_eq!(cfg.block_of(e.focus), cfg.block_of(e.context));
        }
    }

    #[test]
    fn indivisible_blocks_rejected() {
        let cfg = BlocksConfig {
            n: 10,
            blocks: 3,
            interactions: 5,
            in_block: 0.5,
            seed: 0,
        };
        assert!(matches!(generate_blocks(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn in_block_weight_fraction_concentrates() {
        let cfg = BlocksConfig {
            n: 100,
            blocks: 10,
            interactions: 100_000,
            in_block: 0.7,
            seed: 42,
        };
        let m = generate_blocks(&cfg).unwrap();
        assert_eq!(m.total(), 100_000.0);
        let in_block: f64 = m
            .entries()
            .iter()
            .filter(|e| cfg.block_of(e.focus) == cfg.block_of(e.context))
            .map(|e| e.weight)
            .sum();
        let frac = in_block / m.total();
        assert!((frac - 0.7).abs() < 0.01, "in-block fraction {frac}");
    }

    #[test]
    fn in_block_fraction_chi_square() {
        // 1e5 draws; chi-square with one degree of freedom at alpha = 0.01.
        let cfg = BlocksConfig {
            n: 60,
            blocks: 6,
            interactions: 100_000,
            in_block: 0.35,
            seed: 9,
        };
        let m = generate_blocks(&cfg).unwrap();
        let observed_in: f64 = m
            .entries()
            .iter()
            .filter(|e| cfg.block_of(e.focus) == cfg.block_of(e.context))
            .map(|e| e.weight)
            .sum();
        let total = m.total();
        let expected_in = total * cfg.in_block;
        let expected_out = total * (1.0 - cfg.in_block);
        let chi2 = (observed_in - expected_in).powi(2) / expected_in
            + ((total - observed_in) - expected_out).powi(2) / expected_out;
        assert!(
            chi2 < 6.635,
            "chi-square {chi2} exceeds the 1% critical value"
        );
    }

    #[test]
    fn seed_replay_is_identical() {
        let cfg = BlocksConfig {
            n: 20,
            blocks: 4,
            interactions: 500,
            in_block: 0.6,
            seed: 5,
        };
        let a = generate_blocks(&cfg).unwrap();
        let b = generate_blocks(&cfg).unwrap();
        assert_eq!(a.entries().len(), b.entries().len());
        for (x, y) in a.entries().iter().zip(b.entries()) {
            assert_eq!((x.focus, x.context), (y.focus, y.context));
            assert_eq!(x.weight.to_bits(), y.weight.to_bits());
        }
    }

    #[test]
    fn single_block_ignores_out_of_block_branch() {
        let cfg = BlocksConfig {
            n: 8,
            blocks: 1,
            interactions: 100,
            in_block: 0.0,
            seed: 3,
        };
        let m = generate_blocks(&cfg).unwrap();
        assert_eq!(m.total(), 100.0);
    }
}
