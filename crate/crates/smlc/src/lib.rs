//! Seed-based multiple local community detection.
//!
//! Given a graph and a seed node the pipeline samples a local subgraph by
//! diffusion ([`sampling`]), estimates how many communities the sample holds
//! via a sparse-NMF sparseness sweep ([`estimation`]), and returns every
//! community the seed belongs to ([`detection`]). [`metrics`] scores results
//! against ground truth and [`generator`] builds planted-partition
//! benchmarks.

pub mod detection;
pub mod diffusion;
pub mod error;
pub mod estimation;
pub mod factorization;
pub mod generator;
pub mod graph;
pub mod metrics;
pub mod sampling;

pub use error::{Error, Result};
pub use graph::Graph;
