//! Cross-domain node embeddings from a weighted multi-graph.
//!
//! A shared graph-convolution layer over the union of all domains feeds one
//! domain-specific layer per domain. Each domain has its own negative-sampling link
//! loss, and the shared weights follow the minimum-norm convex combination of the
//! per-domain gradients so that every domain's loss descends together.

pub mod error;
pub mod eval;
pub mod gcn;
pub mod mgda;
pub mod multigraph;
pub mod objective;
pub mod rng;
pub mod sparse;
pub mod synth;
pub mod trainer;

pub use error::{Error, Result};
