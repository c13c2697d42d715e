//! Capacity-proportional pruning plans.
//!
//! Each client's pruning ratio follows from its compute capacity relative to
//! the trade-off threshold F_lambda: ratio = max(0, 1 - F_c / F_lambda).
//! Clients at or above the threshold train the unpruned model. Planning is
//! one-shot: it runs once on the initialized global weights and is a pure
//! function of its inputs.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::nn::count::{count_flops, count_params};
use crate::nn::network::Network;
use crate::pruning::groups::dependency_groups;
use crate::pruning::mask::generate_mask;
use crate::pruning::score::layer_scores;
use crate::pruning::speedup::apply_speedup;

/// A client's compute profile. `flops` is throughput in FLOPS
/// (operations per second); `ram_bytes` is carried for reporting only.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HardwareProfile {
    pub id: u32,
    pub flops: f64,
    pub ram_bytes: Option<u64>,
}

impl HardwareProfile {
    pub fn new(id: u32, flops: f64) -> Self {
        Self { id, flops, ram_bytes: None }
    }
}

/// Resolved per-client pruning decision, with provenance and the structural
/// measurements of the resulting model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PruningPlan {
    pub client_id: u32,
    pub ratio: f64,
    pub client_flops: f64,
    pub f_lambda: f64,
    pub layers: Vec<LayerKeep>,
    pub params_before: u64,
    pub params_after: u64,
    pub flops_before: u64,
    pub flops_after: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LayerKeep {
    pub layer: usize,
    pub kind: &'static str,
    pub kept: usize,
    pub total: usize,
}

/// A plan together with the reconfigured model it produced.
#[derive(Debug, Clone)]
pub struct ClientPlan {
    pub plan: PruningPlan,
    pub model: Network<f32>,
}

/// Pruning ratio for a client of capacity `f_c` under threshold `f_lambda`:
/// max(0, 1 - f_c / f_lambda).
pub fn variable_pruning_ratio(f_c: f64, f_lambda: f64) -> Result<f64> {
    if !crate::error::positive(f_c) || !crate::error::positive(f_lambda) {
        return Err(Error::InvalidArgument(format!(
            "capacities must be positive (f_c = {f_c}, f_lambda = {f_lambda})"
        )));
    }
    Ok((1.0 - f_c / f_lambda).max(0.0))
}

/// Idealized parameter count after pruning at ratio `p`: n * (1 - p).
/// Reports juxtapose this linear model with measured structural counts,
/// which shrink roughly as (1 - p)^2 for chained conv layers.
pub fn expected_param_count(n: f64, p: f64) -> Result<f64> {
    check_unit_interval(p)?;
    Ok(n * (1.0 - p))
}

/// Idealized per-pass FLOPs after pruning at ratio `p`: f * (1 - p).
pub fn expected_flops(f: f64, p: f64) -> Result<f64> {
    check_unit_interval(p)?;
    Ok(f * (1.0 - p))
}

fn check_unit_interval(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("ratio {p} outside [0,1]")));
    }
    Ok(())
}

/// One-shot planning over the initialized global model: compute each
/// client's ratio, generate its dependency-aware mask from the global
/// weights' L1 scores, and reconfigure. Clients with equal ratios receive
/// structurally identical models.
pub fn plan_pruning(
    clients: &[HardwareProfile],
    f_lambda: f64,
    base: &Network<f32>,
) -> Result<Vec<ClientPlan>> {
    if clients.is_empty() {
        return Err(Error::InvalidArgument("no clients to plan for".into()));
    }
    let groups = dependency_groups(base)?;
    let scores = layer_scores(base);
    let params_before = count_params(base);
    let flops_before = count_flops(base);

    clients
        .iter()
        .map(|profile| {
            let ratio = variable_pruning_ratio(profile.flops, f_lambda)?;
            let mask = generate_mask(base, ratio, &groups, &scores)?;
            let model = apply_speedup(base, &mask)?;
            let layers = base
                .layers()
                .iter()
                .enumerate()
                .filter(|(_, l)| l.spec.is_prunable())
                .map(|(i, l)| LayerKeep {
                    layer: i,
                    kind: l.spec.kind(),
                    kept: mask.kept_channels(i),
                    total: l.spec.out_channels().unwrap_or(0),
                })
                .collect();
            let plan = PruningPlan {
                client_id: profile.id,
                ratio,
                client_flops: profile.flops,
                f_lambda,
                layers,
                params_before,
                params_after: count_params(&model),
                flops_before,
                flops_after: count_flops(&model),
            };
            Ok(ClientPlan { plan, model })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::models::cnn_small;

    const G: f64 = 1e9;

    #[test]
    fn worked_ratio_examples() {
        // 5 clients at 10/20/40/60/100 GFLOPS.
        let capacities = [10.0, 20.0, 40.0, 60.0, 100.0];
        let at_100: Vec<f64> =
            capacities.iter().map(|&c| variable_pruning_ratio(c * G, 100.0 * G).unwrap()).collect();
        for (got, want) in at_100.iter().zip([0.9, 0.8, 0.6, 0.4, 0.0]) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
        let at_50: Vec<f64> =
            capacities.iter().map(|&c| variable_pruning_ratio(c * G, 50.0 * G).unwrap()).collect();
        for (got, want) in at_50.iter().zip([0.8, 0.6, 0.2, 0.0, 0.0]) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn capacity_above_threshold_clamps_to_zero() {
        assert_eq!(variable_pruning_ratio(150.0 * G, 100.0 * G).unwrap(), 0.0);
    }

    #[test]
    fn non_positive_inputs_are_rejected() {
        assert!(variable_pruning_ratio(0.0, 100.0).is_err());
        assert!(variable_pruning_ratio(10.0, 0.0).is_err());
        assert!(variable_pruning_ratio(-5.0, 100.0).is_err());
        assert!(variable_pruning_ratio(f64::NAN, 100.0).is_err());
    }

    #[test]
    fn ratio_is_scale_invariant_and_monotone() {
        let base = variable_pruning_ratio(30.0, 100.0).unwrap();
        let scaled = variable_pruning_ratio(30.0 * 7.5, 100.0 * 7.5).unwrap();
        assert!((base - scaled).abs() < 1e-12);
        let mut last = 1.0;
        for f_c in [1.0, 10.0, 50.0, 99.0, 100.0, 500.0] {
            let r = variable_pruning_ratio(f_c, 100.0).unwrap();
            assert!(r <= last);
            last = r;
        }
        assert_eq!(variable_pruning_ratio(100.0, 100.0).unwrap(), 0.0);
    }

    #[test]
    fn expected_counts_are_linear() {
        assert_eq!(expected_param_count(100.0, 0.0).unwrap(), 100.0);
        assert!((expected_param_count(100.0, 0.9).unwrap() - 10.0).abs() < 1e-9);
        assert_eq!(expected_flops(100.0, 0.5).unwrap(), 50.0);
        assert!(expected_param_count(1.0, 1.5).is_err());
    }

    #[test]
    fn plan_matches_elementwise_ratios_and_shares_structures() {
        let base = cnn_small(&[1, 8, 8], 4, 9).unwrap();
        let profiles: Vec<HardwareProfile> = [10.0, 20.0, 40.0, 60.0, 100.0, 20.0]
            .iter()
            .enumerate()
            .map(|(i, &g)| HardwareProfile::new(i as u32, g * G))
            .collect();
        let plans = plan_pruning(&profiles, 100.0 * G, &base).unwrap();
        for (cp, profile) in plans.iter().zip(&profiles) {
            let want = variable_pruning_ratio(profile.flops, 100.0 * G).unwrap();
            assert_eq!(cp.plan.ratio, want);
        }
        // Clients 1 and 5 share a ratio: identical models, bit for bit.
        assert_eq!(plans[1].model, plans[5].model);
        // Monotone capacity ordering: more FLOPS, no fewer parameters.
        for pair in plans[..5].windows(2) {
            assert!(pair[0].plan.params_after <= pair[1].plan.params_after);
        }
    }

    #[test]
    fn client_at_threshold_gets_unpruned_copy() {
        let base = cnn_small(&[1, 8, 8], 4, 9).unwrap();
        let plans =
            plan_pruning(&[HardwareProfile::new(0, 200.0 * G)], 100.0 * G, &base).unwrap();
        assert_eq!(plans[0].plan.ratio, 0.0);
        assert_eq!(plans[0].model, base);
        assert_eq!(plans[0].plan.params_after, plans[0].plan.params_before);
    }

    #[test]
    fn planning_is_a_pure_function() {
        let base = cnn_small(&[1, 8, 8], 4, 9).unwrap();
        let profiles = vec![HardwareProfile::new(0, 25.0 * G), HardwareProfile::new(1, 80.0 * G)];
        let a = plan_pruning(&profiles, 100.0 * G, &base).unwrap();
        let b = plan_pruning(&profiles, 100.0 * G, &base).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.plan, y.plan);
            assert_eq!(x.model, y.model);
        }
    }

    #[test]
    fn empty_client_list_is_rejected() {
        let base = cnn_small(&[1, 8, 8], 4, 9).unwrap();
        assert!(plan_pruning(&[], 100.0, &base).is_err());
    }
}
