//! Federated orchestration: client/server state, local training, FedAvg,
//! importance-weighted logit aggregation, one-shot distillation, and the
//! strategy driver.

pub mod distill;
pub mod fedavg;
pub mod importance;
pub mod logits;
pub mod strategy;
pub mod train;

pub use distill::{distill, kd_loss, DistillConfig, DistillLossMode, DistillMetrics};
pub use fedavg::{fedavg_aggregate, global_loss};
pub use importance::{compute_importance_weights, ImportanceWeights};
pub use logits::{aggregate_teacher_logits, client_logits, LogitMatrix};
pub use strategy::{run_strategy, RunFailure};
pub use train::{evaluate, local_train, TrainMetrics};

use crate::data::{LabeledDataset, PublicDataset};
use crate::error::{Error, Result};
use crate::nn::network::Network;
use crate::nn::optim::TrainConfig;
use crate::pruning::HardwareProfile;
use crate::resources::BandwidthLedger;

/// One simulated client: its (possibly pruned) model, private shard,
/// hardware profile, training recipe, and an isolated RNG stream seed.
#[derive(Debug, Clone)]
pub struct ClientState {
    pub id: u32,
    pub model: Network<f32>,
    pub data: LabeledDataset,
    pub profile: HardwareProfile,
    pub train: TrainConfig,
    pub seed: u64,
}

impl ClientState {
    pub fn new(
        id: u32,
        model: Network<f32>,
        data: LabeledDataset,
        profile: HardwareProfile,
        train: TrainConfig,
        seed: u64,
    ) -> Result<Self> {
        if model.input_shape() != data.sample_shape() {
            return Err(Error::Data(format!(
                "client {id}: model expects {:?} inputs, shard samples are {:?}",
                model.input_shape(),
                data.sample_shape()
            )));
        }
        Ok(Self { id, model, data, profile, train, seed })
    }

    pub fn shard_size(&self) -> u64 {
        self.data.len() as u64
    }
}

/// The server: global model, unlabeled public set, distillation settings,
/// and the transfer ledger. There is deliberately no field that could hold
/// a labeled dataset; the server only ever sees logits and count metadata.
#[derive(Debug, Clone)]
pub struct ServerState {
    pub global: Network<f32>,
    pub public: PublicDataset,
    pub distill: DistillConfig,
    pub ledger: BandwidthLedger,
}

impl ServerState {
    pub fn new(global: Network<f32>, public: PublicDataset, distill: DistillConfig) -> Result<Self> {
        if global.input_shape() != public.sample_shape() {
            return Err(Error::Data(format!(
                "global model expects {:?} inputs, public samples are {:?}",
                global.input_shape(),
                public.sample_shape()
            )));
        }
        Ok(Self { global, public, distill, ledger: BandwidthLedger::new() })
    }
}
