//! Coordinated minibatch arrangements for training pairwise-association
//! embeddings.
//!
//! Training data is a sparse nonnegative matrix of association strengths
//! between focus entities (rows) and context entities (columns). The
//! library trains embeddings under the skip-gram-with-negative-sampling
//! loss with one-sided minibatch updates, and lets you choose *how the
//! examples are arranged* into minibatches without changing any example's
//! marginal frequency:
//!
//! * **independent** (`ind`) — singleton microbatches drawn proportionally
//!   to weight, the classic i.i.d. order;
//! * **coordinated** (`coo`) — microbatches that co-place corresponding
//!   examples (a shared context or focus), preserving the expected
//!   weighted Jaccard similarity of rows and columns inside sub-epochs;
//! * **LSH-refined coordinated** — coordinated microbatches partitioned by
//!   Jaccard or angular LSH keys so they stay small while similar entities
//!   stay together;
//! * **mixed schedules** — e.g. start coordinated, switch to independent
//!   at a fixed update count.
//!
//! The crate also ships the measurement side: cosine gap and precision at
//! k over trajectories, empirical Jaccard diagnostics for sub-epoch
//! counts, training-gain comparison between trajectories, a stochastic
//! blocks generator, review-file ingestion, and fixed-subset selection
//! experiments.
//!
//! ```
//! use coobatch::data::{generate_blocks, BlocksConfig};
//! use coobatch::arrange::{ArrangementSchedule, Designation, CooSource};
//!
//! let matrix = generate_blocks(&BlocksConfig {
//!     n: 40,
//!     blocks: 4,
//!     interactions: 2_000,
//!     in_block: 0.8,
//!     seed: 7,
//! })
//! .unwrap();
//!
//! // Draw one coordinated focus microbatch: every positive shares a context.
//! let source = CooSource::new(&matrix).unwrap();
//! let mut rng = coobatch::rng::stream(7, "demo");
//! let mb = source.draw(Designation::Focus, &mut rng);
//! assert!(mb.positives.iter().all(|&(_, j)| j == mb.positives[0].1));
//!
//! // Schedules switch distributions at update counts.
//! let mix = ArrangementSchedule::parse("coo@0, ind@250000").unwrap();
//! assert_eq!(mix.segments().len(), 2);
//! ```

pub mod arrange;
pub mod data;
mod error;
pub mod metrics;
pub mod rng;
pub mod selection;
pub mod train;

pub use error::{Error, Result};

#[cfg(doctest)]
mod guide;
