//! Deterministic simulator for an AI-driven consensus protocol: nodes train a
//! winner recommender with decentralized FedAvg, the aggregated model picks
//! each block's winner, and rewards are split by a three-dimensional Shapley
//! value over model accuracy, energy thrift and bandwidth. Simplified
//! PoW/PoS/PoD/PoFL engines run on the same substrate for comparison.

pub mod domain;
pub mod error;
pub mod metrics;
pub mod recommender;
pub mod rng;
pub mod shapley;
pub mod sim;
pub mod trace;

pub use error::{Error, Result};
