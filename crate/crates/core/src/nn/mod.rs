//! Minimal dense neural-network engine: forward, backward, optimizers,
//! schedulers, losses, counters, and checkpointing for small CNNs/MLPs.

pub mod checkpoint;
pub mod count;
pub mod init;
pub mod layer;
pub mod loss;
pub mod models;
pub mod network;
pub mod optim;

pub use count::{count_flops, count_flops_for, count_params};
pub use layer::LayerSpec;
pub use loss::{accuracy, cross_entropy};
pub use models::ModelId;
pub use network::{ForwardPass, Gradients, Layer, Network, NetworkBuilder};
pub use optim::{adam_step, cosine_anneal_lr, sgd_momentum_step, OptimizerKind, OptimizerState};
