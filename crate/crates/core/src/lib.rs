//! Deterministic federated-learning simulator.
//!
//! The crate models a server and a fleet of heterogeneous clients end to end:
//! capacity-proportional structured channel pruning, local training on
//! non-IID shards, one-shot importance-weighted knowledge distillation back
//! to the server, and exact bandwidth accounting for every transfer. All
//! randomness flows through per-stream seeded generators so any experiment
//! is bit-reproducible, including under different thread counts.

pub mod config;
pub mod data;
pub mod error;
pub mod fl;
pub mod nn;
pub mod pruning;
pub mod report;
pub mod resources;
pub mod rng;
pub mod tensor;

pub use error::{Error, Result};
pub use nn::network::Network;
pub use tensor::Tensor;
