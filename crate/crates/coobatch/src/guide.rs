//! The guide chapters, embedded so `cargo test` compiles and runs every
//! Rust snippet in the book (same trick as running `mdbook test`, but
//! with full rustdoc semantics).

#[doc = include_str!("../../../book/src/association-data.md")]
pub mod association_data {}

#[doc = include_str!("../../../book/src/arrangements.md")]
pub mod arrangements {}

#[doc = include_str!("../../../book/src/lsh-refinement.md")]
pub mod lsh_refinement {}

#[doc = include_str!("../../../book/src/training.md")]
pub mod training {}

#[doc = include_str!("../../../book/src/evaluation.md")]
pub mod evaluation {}

#[doc = include_str!("../../../book/src/selection.md")]
pub mod selection {}
