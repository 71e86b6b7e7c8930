//! Community-count estimation for networks.
//!
//! Fits a degree-corrected stochastic block model with a two-value affinity
//! by EM and belief propagation, scores each candidate number of clusters
//! with several criteria, and compares against spectral counts and greedy
//! modularity / map-equation baselines.

pub mod alluvial;
pub mod bp;
pub mod cli;
pub mod config;
pub mod criteria;
pub mod error;
pub mod generators;
pub mod graph;
pub mod greedy;
pub mod harness;
pub mod partition;
pub mod rng;
pub mod spectral;

pub use error::{Error, Result};
pub use graph::Graph;
pub use partition::Partition;
