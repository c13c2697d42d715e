//! Closed-form bandwidth accounting.
//!
//! Weight-sharing strategies move `clients x rounds x params x bits` of
//! traffic; logit-sharing strategies move `logits x transfers x bits`.
//! All byte math is exact integer arithmetic; megabytes and gigabytes in
//! reports are decimal (1e6 / 1e9).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bit-widths used to cost transfers. `modeled_quant_bits` and
/// `modeled_adaptive_ratio` only feed analytic baseline rows in reports
/// (a quantized-upload baseline and an adaptive-pruning baseline); the
/// simulator never executes those algorithms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CostModel {
    pub bits: u32,
    pub modeled_quant_bits: Option<u32>,
    pub modeled_adaptive_ratio: Option<f64>,
}

impl Default for CostModel {
    fn default() -> Self {
        Self { bits: 32, modeled_quant_bits: Some(8), modeled_adaptive_ratio: Some(0.6) }
    }
}

impl CostModel {
    pub fn validate(&self) -> Result<()> {
        check_bits(self.bits)?;
        if let Some(bits) = self.modeled_quant_bits {
            check_bits(bits)?;
        }
        if let Some(ratio) = self.modeled_adaptive_ratio {
            if !(0.0..1.0).contains(&ratio) {
                return Err(Error::InvalidArgument(format!(
                    "modeled adaptive ratio {ratio} outside [0,1)"
                )));
            }
        }
        Ok(())
    }
}

fn check_bits(bits: u32) -> Result<()> {
    if ![8, 16, 32, 64].contains(&bits) {
        return Err(Error::InvalidArgument(format!(
            "bit-width {bits} not in {{8, 16, 32, 64}}"
        )));
    }
    Ok(())
}

/// Total bytes for weight transfers: clients x rounds x params x bits / 8.
pub fn bandwidth_weights(clients: u64, rounds: u64, params: u64, bits: u32) -> Result<u64> {
    if clients == 0 || params == 0 {
        return Err(Error::InvalidArgument(
            "bandwidth_weights needs positive client and parameter counts".into(),
        ));
    }
    check_bits(bits)?;
    Ok(clients * rounds * per_transfer_bytes(params, bits))
}

/// Bytes of one weight payload: params x bits / 8.
pub fn per_transfer_bytes(params: u64, bits: u32) -> u64 {
    params * bits as u64 / 8
}

/// Total bytes for logit transfers: logits x transfers x bits / 8.
pub fn bandwidth_logits(logits: u64, transfers: u64, bits: u32) -> Result<u64> {
    check_bits(bits)?;
    Ok(logits * transfers * bits as u64 / 8)
}
