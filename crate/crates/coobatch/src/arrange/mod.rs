//! Arrangement of training examples: microbatch distributions, LSH
//! refinement, minibatch assembly, and scheduling.

mod alias;
mod draw;
mod lsh;
mod minibatch;
mod refined;
mod schedule;
mod types;

pub use alias::AliasTable;
pub use draw::{CooSource, IndSource, MicrobatchSource};
pub use lsh::{
    adaptive_refine, angular_lsh_map, jaccard_lsh_map, oracle_refine, refine, LshMap, LshPool,
};
pub use minibatch::{build_minibatch, NegativeSampler};
pub use refined::RefinedCooSource;
pub use schedule::{
    schedule_next, ArrangementSchedule, Distribution, LshFamily, MapPolicy, ScheduleState,
};
pub use types::{Designation, Microbatch, Minibatch};
