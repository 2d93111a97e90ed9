//! Trace-driven simulation of a cache hierarchy and a hybrid storage system
//! with learned and heuristic policies.

pub mod error;
pub mod harness;
pub mod hash;
pub mod hermes;
pub mod learn_perceptron;
pub mod learn_rl;
pub mod mem_sim;
pub mod pythia;
pub mod rng;
pub mod sibyl;
pub mod trace;

pub use error::{Error, Result};
