//! Embedding model, SGNS loss, one-sided minibatch updates, checkpoints,
//! and the training loop.

mod checkpoint;
mod model;
mod trainer;

pub use checkpoint::{read_checkpoint, write_checkpoint};
pub use model::{
    apply_minibatch, loss_terms, score, sgns_gradients64, sgns_loss64, sigmoid, EmbeddingModel,
    EmbeddingTable, ExampleKind, UpdateSummary,
};
pub use trainer::{train, EvalSpec, TrainConfig, TrainResources};
