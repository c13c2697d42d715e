//! Run reports, CSV emission, and the high-level entry points behind the
//! CLI verbs (`run`, `prune-report`, `compare`).

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::{ExperimentConfig, Strategy};
use crate::error::{Error, Result};
use crate::fl::strategy::{run_strategy, RunFailure};
use crate::nn::checkpoint;
use crate::nn::count::{count_flops, count_params};
use crate::nn::models::ModelId;
use crate::pruning::{
    apply_speedup, dependency_groups, expected_param_count, generate_mask, layer_scores,
    PruningPlan,
};
use crate::resources::{BandwidthLedger, Direction};
use crate::rng::{derive_seed, STREAM_INIT};

/// One line of the metrics time series. Optional fields print as empty CSV
/// cells for stages they do not apply to.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsRow {
    pub round: u32,
    pub client_id: String,
    pub stage: String,
    pub train_loss: Option<f64>,
    pub test_acc: Option<f64>,
    pub bytes_down: Option<u64>,
    pub bytes_up: Option<u64>,
    pub params: Option<u64>,
    pub flops: Option<u64>,
    pub pruning_ratio: Option<f64>,
}

/// Final per-client outcome of a run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClientOutcome {
    pub client_id: u32,
    pub gflops: f64,
    pub pruning_ratio: f64,
    pub params: u64,
    pub flops_per_sample: u64,
    pub test_accuracy: Option<f64>,
    pub bytes_down: u64,
    pub bytes_up: u64,
    /// Forward scorings of the public set this client performed (one-shot
    /// strategies must show exactly 1; fedavg shows 0).
    pub logit_passes: u32,
    pub simulated_train_seconds: f64,
    /// Capacity utilization under a weakest-client static policy.
    pub utilization_static: f64,
}

/// One row of the communication summary table. Executed rows trace to
/// ledger entries; modeled rows are closed-form projections with their
/// assumption spelled out.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub method: String,
    pub downstream_bytes_min: u64,
    pub downstream_bytes_max: u64,
    pub upstream_bytes_min: u64,
    pub upstream_bytes_max: u64,
    pub total_per_client_min: u64,
    pub total_per_client_max: u64,
    pub modeled: bool,
    pub assumption: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandwidthSummary {
    pub rows: Vec<SummaryRow>,
    pub ledger_total_bytes: u64,
    pub ledger_down_bytes: u64,
    pub ledger_up_bytes: u64,
}

/// Everything a run produces besides the raw ledger.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub config: ExperimentConfig,
    pub rows: Vec<MetricsRow>,
    pub plans: Vec<PruningPlan>,
    pub clients: Vec<ClientOutcome>,
    pub final_global_accuracy: Option<f64>,
    pub final_global_loss: Option<f64>,
    pub summary: BandwidthSummary,
    #[serde(skip)]
    pub ledger: BandwidthLedger,
    /// How public-set classes relate to private ones (index mapping stands
    /// in for true cross-domain data and is flagged here).
    pub public_domain: String,
    pub notes: Vec<String>,
}

impl RunReport {
    pub fn metrics_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(
            "round,client_id,stage,train_loss,test_acc,bytes_down,bytes_up,params,flops,pruning_ratio\n",
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                r.round,
                r.client_id,
                r.stage,
                opt(r.train_loss),
                opt(r.test_acc),
                opt(r.bytes_down),
                opt(r.bytes_up),
                opt(r.params),
                opt(r.flops),
                opt(r.pruning_ratio),
            );
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Artifact paths written by [`write_artifacts`].
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub report_json: PathBuf,
    pub metrics_csv: PathBuf,
    pub ledger_csv: PathBuf,
    pub resolved_config: PathBuf,
}

/// Write report.json, metrics.csv, ledger.csv, and the resolved config.
pub fn write_artifacts(report: &RunReport, out_dir: &Path) -> Result<RunArtifacts> {
    fs::create_dir_all(out_dir)?;
    let artifacts = RunArtifacts {
        report_json: out_dir.join("report.json"),
        metrics_csv: out_dir.join("metrics.csv"),
        ledger_csv: out_dir.join("ledger.csv"),
        resolved_config: out_dir.join("resolved_config.json"),
    };
    fs::write(&artifacts.report_json, report.to_json())?;
    fs::write(&artifacts.metrics_csv, report.metrics_csv())?;
    let mut ledger_csv = Vec::new();
    report.ledger.write_csv(&mut ledger_csv)?;
    fs::write(&artifacts.ledger_csv, ledger_csv)?;
    fs::write(&artifacts.resolved_config, report.config.to_json())?;
    Ok(artifacts)
}

/// Run an experiment inside a rayon pool of `threads` (or the default pool)
/// and write its artifacts under `out_dir`.
///
/// On an aborted run the partial report is still written and the error is
/// returned.
pub fn execute_run(
    config: &ExperimentConfig,
    threads: Option<usize>,
    out_dir: Option<&Path>,
) -> Result<(RunReport, RunArtifacts)> {
    let result = match threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::InvalidArgument(format!("cannot build thread pool: {e}")))?;
            pool.install(|| run_strategy(config))
        }
        None => run_strategy(config),
    };
    let dir = out_dir.unwrap_or(&config.out_dir).to_path_buf();
    match result {
        Ok(report) => {
            let artifacts = write_artifacts(&report, &dir)?;
            Ok((report, artifacts))
        }
        Err(failure) => {
            let RunFailure { error, partial } = *failure;
            let _ = write_artifacts(&partial, &dir);
            Err(error)
        }
    }
}

// ---------------------------------------------------------------------------
// prune-report
// ---------------------------------------------------------------------------

/// One measured row of the structural pruning table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PruneReportRow {
    pub ratio: f64,
    pub params: u64,
    /// Forward FLOPs per sample, 1 MAC = 1 FLOP.
    pub flops_mac1: u64,
    /// The multiply-and-add-counted-separately alternative (2 FLOPs per
    /// MAC) for cross-checking against other toolchains.
    pub flops_mac2: u64,
    pub serialized_bytes: u64,
    pub serialized_mb: f64,
    /// Linear idealization n * (1 - ratio), for juxtaposition with the
    /// measured count (chained convs shrink roughly quadratically).
    pub expected_linear_params: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PruneReport {
    pub model: String,
    pub input_shape: Vec<usize>,
    pub classes: usize,
    pub rows: Vec<PruneReportRow>,
}

impl PruneReport {
    pub fn csv(&self) -> String {
        let mut out = String::from(
            "ratio,params,flops_mac1,flops_mac2,serialized_bytes,serialized_mb,expected_linear_params\n",
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.ratio,
                r.params,
                r.flops_mac1,
                r.flops_mac2,
                r.serialized_bytes,
                r.serialized_mb,
                r.expected_linear_params
            );
        }
        out
    }
}

/// Instantiate `model`, prune it at each ratio, and measure parameters,
/// FLOPs, and serialized size. Megabytes are decimal.
pub fn prune_report(model: ModelId, ratios: &[f64], seed: u64) -> Result<PruneReport> {
    let (input_shape, classes) = model.reference_input();
    let net = model.build(&input_shape, classes, derive_seed(seed, STREAM_INIT))?;
    let groups = dependency_groups(&net)?;
    let scores = layer_scores(&net);
    let base_params = count_params(&net) as f64;
    let mut rows = Vec::with_capacity(ratios.len());
    for &ratio in ratios {
        let mask = generate_mask(&net, ratio, &groups, &scores)?;
        let pruned = apply_speedup(&net, &mask)?;
        let params = count_params(&pruned);
        let flops = count_flops(&pruned);
        let bytes = checkpoint::serialized_size(&pruned);
        let conv_dense_macs = flops_macs_only(&pruned);
        rows.push(PruneReportRow {
            ratio,
            params,
            flops_mac1: flops,
            flops_mac2: flops + conv_dense_macs,
            serialized_bytes: bytes,
            serialized_mb: bytes as f64 / 1e6,
            expected_linear_params: expected_param_count(base_params, ratio)?,
        });
    }
    Ok(PruneReport {
        model: model.to_string(),
        input_shape,
        classes,
        rows,
    })
}

/// MAC-only portion of the FLOP count (the part that doubles under the
/// 2-FLOPs-per-MAC convention).
fn flops_macs_only(net: &crate::nn::network::Network<f32>) -> u64 {
    use crate::nn::layer::LayerSpec;
    let mut shape = net.input_shape().to_vec();
    let mut total = 0u64;
    for (i, layer) in net.layers().iter().enumerate() {
        let out = layer.spec.output_shape(i, &shape).expect("validated network");
        let out_elems: u64 = out.iter().product::<usize>() as u64;
        total += match layer.spec {
            LayerSpec::Conv2d { in_channels, kernel, .. } => {
                out_elems * (in_channels * kernel * kernel) as u64
            }
            LayerSpec::Dense { in_features, .. } => out_elems * in_features as u64,
            _ => 0,
        };
        shape = out;
    }
    total
}

// ---------------------------------------------------------------------------
// compare
// ---------------------------------------------------------------------------

/// Run several configs (sharing one dataset seed) and align their
/// per-client series into one CSV: strategy x metric.
pub fn compare(configs: &[ExperimentConfig], threads: Option<usize>, out_dir: &Path) -> Result<PathBuf> {
    let first = configs
        .first()
        .ok_or_else(|| Error::InvalidArgument("compare needs at least one config".into()))?;
    for cfg in configs {
        if cfg.seed != first.seed || cfg.dataset != first.dataset {
            return Err(Error::InvalidArgument(
                "compare requires identical dataset blocks and seeds across configs".into(),
            ));
        }
    }
    fs::create_dir_all(out_dir)?;
    let mut out = String::from(
        "strategy,round,client_id,stage,train_loss,test_acc,bytes_down,bytes_up,pruning_ratio\n",
    );
    for cfg in configs {
        let sub = out_dir.join(format!("run-{}", cfg.strategy.as_str()));
        let (report, _) = execute_run(cfg, threads, Some(&sub))?;
        for r in &report.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                cfg.strategy.as_str(),
                r.round,
                r.client_id,
                r.stage,
                opt(r.train_loss),
                opt(r.test_acc),
                opt(r.bytes_down),
                opt(r.bytes_up),
                opt(r.pruning_ratio),
            );
        }
    }
    let path = out_dir.join("compare.csv");
    fs::write(&path, out)?;
    Ok(path)
}

// ---------------------------------------------------------------------------
// Summary assembly (used by the strategy driver)
// ---------------------------------------------------------------------------

/// Build the summary table: the executed strategy measured from the ledger,
/// plus closed-form modeled baselines.
pub fn build_summary(
    config: &ExperimentConfig,
    ledger: &BandwidthLedger,
    unpruned_params: u64,
    public_logits_per_client: &[u64],
) -> BandwidthSummary {
    let client_ids: Vec<u32> = config.clients.iter().map(|c| c.id).collect();
    let bits = config.cost.bits;
    let mut down = Vec::new();
    let mut up = Vec::new();
    let mut totals = Vec::new();
    for &id in &client_ids {
        let d: u64 = ledger
            .entries()
            .iter()
            .filter(|e| e.client == id && e.direction == Direction::Down)
            .map(|e| e.bytes)
            .sum();
        let u: u64 = ledger
            .entries()
            .iter()
            .filter(|e| e.client == id && e.direction == Direction::Up)
            .map(|e| e.bytes)
            .sum();
        down.push(d);
        up.push(u);
        totals.push(d + u);
    }
    let minmax = |v: &[u64]| {
        (v.iter().copied().min().unwrap_or(0), v.iter().copied().max().unwrap_or(0))
    };
    let (dmin, dmax) = minmax(&down);
    let (umin, umax) = minmax(&up);
    let (tmin, tmax) = minmax(&totals);

    let mut rows = vec![SummaryRow {
        method: format!("{} (executed)", config.strategy.as_str()),
        downstream_bytes_min: dmin,
        downstream_bytes_max: dmax,
        upstream_bytes_min: umin,
        upstream_bytes_max: umax,
        total_per_client_min: tmin,
        total_per_client_max: tmax,
        modeled: false,
        assumption: "accumulated from ledger entries".into(),
    }];

    let weight_bytes = unpruned_params * bits as u64 / 8;
    let rounds = config.rounds as u64;
    if config.strategy != Strategy::Fedavg {
        rows.push(SummaryRow {
            method: "fedavg (modeled)".into(),
            downstream_bytes_min: weight_bytes * rounds,
            downstream_bytes_max: weight_bytes * rounds,
            upstream_bytes_min: weight_bytes * rounds,
            upstream_bytes_max: weight_bytes * rounds,
            total_per_client_min: 2 * weight_bytes * rounds,
            total_per_client_max: 2 * weight_bytes * rounds,
            modeled: true,
            assumption: format!(
                "full weights both directions, {rounds} rounds, {bits}-bit"
            ),
        });
    }
    if let Some(qbits) = config.cost.modeled_quant_bits {
        // Static-pruning baseline with quantized uploads and unreconfigured
        // (full-size) downloads.
        let up_bytes = unpruned_params * qbits as u64 / 8;
        rows.push(SummaryRow {
            method: "static-prune+quantized-upload (modeled)".into(),
            downstream_bytes_min: weight_bytes * rounds,
            downstream_bytes_max: weight_bytes * rounds,
            upstream_bytes_min: up_bytes * rounds,
            upstream_bytes_max: up_bytes * rounds,
            total_per_client_min: (weight_bytes + up_bytes) * rounds,
            total_per_client_max: (weight_bytes + up_bytes) * rounds,
            modeled: true,
            assumption: format!(
                "masked-not-reconfigured weights down, int{qbits} weights up, {rounds} rounds"
            ),
        });
    }
    if let Some(ratio) = config.cost.modeled_adaptive_ratio {
        let kept = ((unpruned_params as f64) * (1.0 - ratio)) as u64;
        let bytes = kept * bits as u64 / 8;
        rows.push(SummaryRow {
            method: "adaptive-prune (modeled)".into(),
            downstream_bytes_min: bytes * rounds,
            downstream_bytes_max: bytes * rounds,
            upstream_bytes_min: bytes * rounds,
            upstream_bytes_max: bytes * rounds,
            total_per_client_min: 2 * bytes * rounds,
            total_per_client_max: 2 * bytes * rounds,
            modeled: true,
            assumption: format!(
                "final adaptive ratio {ratio}, linear parameter reduction, {rounds} rounds"
            ),
        });
    }
    let _ = public_logits_per_client;
    BandwidthSummary {
        rows,
        ledger_total_bytes: ledger.total_bytes(),
        ledger_down_bytes: ledger.total_in(Direction::Down),
        ledger_up_bytes: ledger.total_in(Direction::Up),
    }
}
