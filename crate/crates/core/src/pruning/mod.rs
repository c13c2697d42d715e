//! Structured L1 channel pruning with dependency-aware masks, true model
//! reconfiguration, and the capacity-proportional planner.

pub mod groups;
pub mod mask;
pub mod plan;
pub mod score;
pub mod speedup;

pub use groups::{dependency_groups, DependencyGroup};
pub use mask::{generate_mask, ChannelMask};
pub use plan::{
    expected_flops, expected_param_count, plan_pruning, variable_pruning_ratio, ClientPlan,
    HardwareProfile, LayerKeep, PruningPlan,
};
pub use score::{channel_l1_scores, layer_scores, LayerScores};
pub use speedup::apply_speedup;
