//! Resource accounting: bandwidth formulas, the transfer ledger, and
//! FLOP-based time proxies.

pub mod bandwidth;
pub mod ledger;
pub mod timing;

pub use bandwidth::{bandwidth_logits, bandwidth_weights, per_transfer_bytes, CostModel};
pub use ledger::{record_transfer, BandwidthLedger, Direction, PayloadKind, TransferRecord};
pub use timing::{simulated_train_time, utilization_factor};
