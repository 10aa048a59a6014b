//! Desk-scale pipeline for application-to-architecture dependency analysis:
//! parse or generate dynamic instruction traces, build the weighted
//! dependency graph and the multi-layer graph over instructions, processes,
//! physical frames and cores, partition instructions into overlapping
//! clusters by minimizing an Amdahl-style quality function, map the resulting
//! processes onto a mesh of cores with an affinity-aware greedy heuristic,
//! and score mappings with a parameterized cost-model simulator.

pub mod depgraph;
pub mod error;
pub mod mapper;
pub mod mlgraph;
pub mod oracle;
pub mod partitioner;
pub mod pipeline;
pub mod simkernel;
pub mod trace;

pub use error::{Error, Result};
