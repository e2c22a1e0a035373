//! Graph sampling in the random neighborhood model.
//!
//! The crate covers the whole pipeline: CSR graphs and generators, a counted
//! query oracle, random ball sampling, exact canonical certificates of the
//! sampled subgraphs, empirical profiles and the sampling distance between
//! graphs, constant-time estimators, and a small message-passing network
//! that only ever reads sampled subgraphs.

pub mod canonical;
pub mod error;
pub mod estimators;
pub mod exact;
pub mod experiments;
pub mod generators;
pub mod graph;
pub mod metric;
pub mod oracle;
pub mod rbsgnn;
pub mod sampler;
pub mod seed;
pub mod transport;

pub use error::{Error, Result};
pub use graph::{Graph, VertexId};
