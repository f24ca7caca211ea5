//! Adaptive treatment allocation on networks whose interference graph is unknown.
//!
//! The crate simulates bandit experiments where each round a policy treats at
//! most `B` of `n` nodes and observes every node's noisy reward, which depends
//! on the node's own treatment and on its neighbours' treatments. The main
//! policy is Thompson sampling over the joint posterior of the reward
//! parameters and the graph, maintained with edge-wise Gibbs sweeps.
//!
//! Module map:
//! - [`graph`]: adjacency type, random generators, edge-list loading, recovery metrics.
//! - [`reward`]: reward parameterizations, parameter protocols and ground-truth environments.
//! - [`posterior`]: conjugate updates, Gibbs sweeps and the exhaustive-enumeration oracle.
//! - [`policies`]: treatment optimizers and the bandit policies.
//! - [`runner`]: configuration, replications, sweeps and output files.
//! - [`causal`]: downstream effect estimands and estimators.
//! - [`cli`]: the `netbandit` command line.

pub mod causal;
pub mod cli;
pub mod error;
pub mod graph;
pub mod policies;
pub mod posterior;
pub mod reward;
pub mod runner;
pub mod seeds;

pub use error::{Error, Result};

/// The random generator used everywhere in the crate.
pub type SimRng = rand_chacha::ChaCha8Rng;
