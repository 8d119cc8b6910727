//! Association data: the sparse matrix, synthetic generation, review
//! ingestion, train/test splitting, and weighted Jaccard similarity.

mod blocks;
mod jaccard;
mod matrix;
mod reviews;
mod split;

pub use blocks::{generate_blocks, sample_block_pairs, BlocksConfig};
pub use jaccard::weighted_jaccard;
pub use matrix::{pairwise_sum, AssociationMatrix, Entry};
pub use reviews::{load_reviews, ReviewData, ReviewsConfig};
pub use split::{split_train_test, TestSplit};
