//! Append-only transfer ledger.
//!
//! Every simulated transfer lands here with its exact byte cost, so report
//! totals always reconcile against the closed-form formulas.

use std::io::Write;

use serde::Serialize;

use crate::error::Result;
use crate::resources::bandwidth::{bandwidth_logits, per_transfer_bytes, CostModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Down,
    Up,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Down => "down",
            Direction::Up => "up",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PayloadKind {
    Weights,
    Logits,
}

impl PayloadKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PayloadKind::Weights => "weights",
            PayloadKind::Logits => "logits",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TransferRecord {
    pub client: u32,
    pub round: u32,
    pub direction: Direction,
    pub kind: PayloadKind,
    /// Payload size in native units: parameters for weights, logit values
    /// for logits.
    pub units: u64,
    pub bytes: u64,
}

/// Append-only list of transfers. No removal or mutation API exists.
#[derive(Debug, Clone, Default, Serialize)]
pub struct BandwidthLedger {
    entries: Vec<TransferRecord>,
}

/// Record one transfer, costing it with the model's bit-width.
pub fn record_transfer(
    ledger: &mut BandwidthLedger,
    client: u32,
    round: u32,
    direction: Direction,
    kind: PayloadKind,
    size_units: u64,
    cost: &CostModel,
) -> Result<()> {
    let bytes = match kind {
        PayloadKind::Weights => per_transfer_bytes(size_units, cost.bits),
        PayloadKind::Logits => bandwidth_logits(size_units, 1, cost.bits)?,
    };
    ledger.entries.push(TransferRecord { client, round, direction, kind, units: size_units, bytes });
    Ok(())
}

impl BandwidthLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn entries(&self) -> &[TransferRecord] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total_bytes(&self) -> u64 {
        self.entries.iter().map(|e| e.bytes).sum()
    }

    pub fn total_in(&self, direction: Direction) -> u64 {
        self.entries
            .iter()
            .filter(|e| e.direction == direction)
            .map(|e| e.bytes)
            .sum()
    }

    pub fn client_total(&self, client: u32) -> u64 {
        self.entries
            .iter()
            .filter(|e| e.client == client)
            .map(|e| e.bytes)
            .sum()
    }

    pub fn client_direction_entries(&self, client: u32, direction: Direction) -> usize {
        self.entries
            .iter()
            .filter(|e| e.client == client && e.direction == direction)
            .count()
    }

    /// CSV with columns client, round, direction, kind, bytes.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "client,round,direction,kind,bytes")?;
        for e in &self.entries {
            writeln!(
                w,
                "{},{},{},{},{}",
                e.client,
                e.round,
                e.direction.as_str(),
                e.kind.as_str(),
                e.bytes
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::resources::bandwidth::bandwidth_weights;

    #[test]
    fn fedavg_round_pattern_reconciles_with_closed_form() {
        // n clients, R rounds, both directions: ledger total equals the
        // closed form exactly.
        let (clients, rounds, params) = (4u32, 7u32, 12_345u64);
        let cost = CostModel::default();
        let mut ledger = BandwidthLedger::new();
        for round in 0..rounds {
            for client in 0..clients {
                record_transfer(&mut ledger, client, round, Direction::Down, PayloadKind::Weights, params, &cost).unwrap();
                record_transfer(&mut ledger, client, round, Direction::Up, PayloadKind::Weights, params, &cost).unwrap();
            }
        }
        let closed = 2 * bandwidth_weights(clients as u64, rounds as u64, params, cost.bits).unwrap();
        assert_eq!(ledger.total_bytes(), closed);
        assert_eq!(ledger.len(), (2 * clients * rounds) as usize);
        assert_eq!(ledger.total_in(Direction::Down), closed / 2);
    }

    #[test]
    fn one_shot_pattern_has_n_down_and_n_up() {
        let cost = CostModel::default();
        let mut ledger = BandwidthLedger::new();
        for client in 0..5u32 {
            record_transfer(&mut ledger, client, 0, Direction::Down, PayloadKind::Weights, 1000, &cost).unwrap();
            record_transfer(&mut ledger, client, 0, Direction::Up, PayloadKind::Logits, 640, &cost).unwrap();
        }
        for client in 0..5 {
            assert_eq!(ledger.client_direction_entries(client, Direction::Down), 1);
            assert_eq!(ledger.client_direction_entries(client, Direction::Up), 1);
        }
        assert_eq!(ledger.client_total(0), 1000 * 4 + 640 * 4);
    }

    #[test]
    fn csv_layout_is_stable() {
        let cost = CostModel::default();
        let mut ledger = BandwidthLedger::new();
        record_transfer(&mut ledger, 2, 1, Direction::Up, PayloadKind::Logits, 10, &cost).unwrap();
        let mut out = Vec::new();
        ledger.write_csv(&mut out).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "client,round,direction,kind,bytes\n2,1,up,logits,40\n"
        );
    }
}
