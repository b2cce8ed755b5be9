//! Budget-constrained network design for stochastic cascades: instance
//! model, cascade sampling, scenario preprocessing, sample-average MIP with
//! exact branch-and-bound, greedy baselines and instance generators.

pub mod cascade;
pub mod generate;
pub mod graph;
pub mod greedy;
pub mod mip;
pub mod mps;
pub mod preprocess;
pub mod rng;
pub mod saa;
pub mod scenario;
pub mod stats;

pub use cascade::{CascadeSample, CascadeSampler, MetapopSpec};
pub use graph::{ActionId, Instance, NodeId, Strategy};
pub use mip::{build_mip, solve_exact, MipModel, SolveResult, SolveStatus};
pub use preprocess::{reduce, ReducedCascade};
pub use rng::{SeedKey, Stream};
pub use scenario::Cascade;
pub use stats::Estimate;
