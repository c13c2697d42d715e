//! Strategy driver: fedavg, static pruning, and the variable-pruning
//! one-shot distillation pipeline.
//!
//! All three strategies share the same setup: synthesize (or load) the
//! dataset, carve Dirichlet shards, initialize the global model, and apply
//! a round-0 pruning plan. They differ afterwards:
//!
//! - `fedavg`: R rounds of broadcast / local train / upload / parameter
//!   averaging. Averaging requires identical architectures, so a plan with
//!   heterogeneous ratios aborts with the documented mismatch error.
//! - `static`: every client is pruned to the weakest client's ratio, then
//!   the one-shot pipeline runs.
//! - `reft`: per-client capacity-proportional ratios, then the one-shot
//!   pipeline: local training, one logit pass per client over the public
//!   set, importance-weighted aggregation, offline distillation.
//!
//! Client work runs on a rayon pool; results are collected positionally and
//! every reduction iterates clients in id order, so outputs do not depend
//! on thread count.

use std::collections::BTreeSet;

use rayon::prelude::*;

use crate::config::{DatasetConfig, ExperimentConfig, PublicDomain, Strategy};
use crate::data::{
    class_counts, dirichlet_partition, load_raw, synth_dataset, synth_holdout, synth_public,
    LabeledDataset, PartitionSpec, PublicDataset,
};
use crate::error::{Error, Result};
use crate::fl::distill::distill;
use crate::fl::fedavg::{fedavg_aggregate, global_loss};
use crate::fl::importance::compute_importance_weights;
use crate::fl::logits::{aggregate_teacher_logits, client_logits, LogitMatrix};
use crate::fl::train::{evaluate, local_train, TrainMetrics};
use crate::fl::{ClientState, ServerState};
use crate::nn::count::{count_flops, count_params};
use crate::nn::network::Network;
use crate::pruning::{
    apply_speedup, dependency_groups, generate_mask, layer_scores, plan_pruning, variable_pruning_ratio,
    ClientPlan, HardwareProfile, LayerKeep, PruningPlan,
};
use crate::report::{build_summary, ClientOutcome, MetricsRow, RunReport};
use crate::resources::{record_transfer, Direction, PayloadKind};
use crate::resources::timing::{simulated_train_time, utilization_factor};
use crate::rng::{client_seed, derive_seed, STREAM_DATA, STREAM_DISTILL, STREAM_INIT, STREAM_PARTITION};


/// An aborted run: the typed error plus everything recorded up to the
/// abort, so partial artifacts can still be written.
#[derive(Debug)]
pub struct RunFailure {
    pub error: Error,
    pub partial: RunReport,
}

/// Execute one experiment end to end.
pub fn run_strategy(config: &ExperimentConfig) -> std::result::Result<RunReport, Box<RunFailure>> {
    config.validate().map_err(|e| bare_failure(config, e))?;
    let setup = prepare(config).map_err(|e| bare_failure(config, e))?;
    match config.strategy {
        Strategy::Fedavg => run_fedavg(config, setup),
        Strategy::Static | Strategy::Reft => run_one_shot(config, setup),
    }
}

fn bare_failure(config: &ExperimentConfig, error: Error) -> Box<RunFailure> {
    Box::new(RunFailure { error, partial: empty_report(config) })
}

fn empty_report(config: &ExperimentConfig) -> RunReport {
    RunReport {
        config: config.clone(),
        rows: Vec::new(),
        plans: Vec::new(),
        clients: Vec::new(),
        final_global_accuracy: None,
        final_global_loss: None,
        summary: build_summary(config, &Default::default(), 1, &[]),
        ledger: Default::default(),
        public_domain: String::new(),
        notes: Vec::new(),
    }
}

struct Setup {
    clients: Vec<ClientState>,
    server: ServerState,
    test_set: Option<LabeledDataset>,
    plans: Vec<PruningPlan>,
    unpruned_params: u64,
    notes: Vec<String>,
    public_domain: String,
}

fn prepare(config: &ExperimentConfig) -> Result<Setup> {
    let mut notes = vec![
        "flops use the 1-MAC-=-1-FLOP convention; prune-report carries the x2 alternative"
            .to_string(),
    ];

    // Data.
    let (train, test_set, public, public_domain) = build_datasets(config, &mut notes)?;
    let classes = train.classes();
    let input_shape = train.sample_shape().to_vec();

    // Shards.
    let spec = PartitionSpec {
        clients: config.clients.len(),
        alpha: config.partition.alpha,
        seed: derive_seed(config.seed, STREAM_PARTITION),
        min_shard: config.min_shard().min(train.len() / config.clients.len()),
    };
    let shards = dirichlet_partition(&train, &spec)?;

    // Global model and the round-0 plan.
    let base = config.model.build(&input_shape, classes, derive_seed(config.seed, STREAM_INIT))?;
    let unpruned_params = count_params(&base);
    let mut profiles: Vec<HardwareProfile> = config
        .clients
        .iter()
        .map(|c| HardwareProfile { id: c.id, flops: c.gflops * 1e9, ram_bytes: c.ram_bytes })
        .collect();
    profiles.sort_by_key(|p| p.id);

    let client_plans = match config.strategy {
        Strategy::Static => static_plans(&profiles, config.f_lambda(), &base)?,
        Strategy::Fedavg | Strategy::Reft => plan_pruning(&profiles, config.f_lambda(), &base)?,
    };

    let mut clients = Vec::with_capacity(profiles.len());
    for ((profile, shard), cp) in profiles.iter().zip(shards).zip(&client_plans) {
        clients.push(ClientState::new(
            profile.id,
            cp.model.clone(),
            shard,
            profile.clone(),
            config.train,
            client_seed(config.seed, profile.id),
        )?);
    }
    let server = ServerState::new(base, public, config.distill)?;
    Ok(Setup {
        clients,
        server,
        test_set,
        plans: client_plans.into_iter().map(|cp| cp.plan).collect(),
        unpruned_params,
        notes,
        public_domain,
    })
}

fn build_datasets(
    config: &ExperimentConfig,
    notes: &mut Vec<String>,
) -> Result<(LabeledDataset, Option<LabeledDataset>, PublicDataset, String)> {
    let data_seed = derive_seed(config.seed, STREAM_DATA);
    match &config.dataset {
        DatasetConfig::Synthetic(s) => {
            let train =
                synth_dataset(s.classes, s.per_class, &s.input_shape, s.separation, data_seed)?;
            // Same data seed: the holdout shares the train centroids and
            // differs only through its own noise stream.
            let test =
                synth_holdout(s.classes, s.test_per_class, &s.input_shape, s.separation, data_seed)?;
            let same_domain = config.public.domain == PublicDomain::SameDomain;
            let public = synth_public(
                s.classes,
                config.public.samples,
                &s.input_shape,
                s.separation,
                data_seed,
                same_domain,
            )?;
            let domain = if same_domain {
                "same-domain (shared centroids)".to_string()
            } else {
                "shifted-domain (classes map to private classes by index)".to_string()
            };
            Ok((train, Some(test), public, domain))
        }
        DatasetConfig::Raw(r) => {
            let train = load_raw(&r.train_path, &r.format)?;
            if train.is_empty() {
                return Err(Error::Data(format!("{} holds no records", r.train_path.display())));
            }
            let test = r
                .test_path
                .as_ref()
                .map(|p| load_raw(p, &r.format))
                .transpose()?;
            let shape = train.sample_shape().to_vec();
            let public = synth_public(
                train.classes(),
                config.public.samples,
                &shape,
                1.0,
                data_seed,
                false,
            )?;
            notes.push(
                "raw dataset: public set is synthetic over the same input shape".to_string(),
            );
            Ok((train, test, public, "synthetic stand-in for raw data".to_string()))
        }
    }
}

/// Uniform plan at the weakest client's ratio.
fn static_plans(
    profiles: &[HardwareProfile],
    f_lambda: f64,
    base: &Network<f32>,
) -> Result<Vec<ClientPlan>> {
    let weakest = profiles
        .iter()
        .map(|p| p.flops)
        .fold(f64::INFINITY, f64::min);
    let ratio = variable_pruning_ratio(weakest, f_lambda)?;
    let groups = dependency_groups(base)?;
    let scores = layer_scores(base);
    let mask = generate_mask(base, ratio, &groups, &scores)?;
    let model = apply_speedup(base, &mask)?;
    let params_before = count_params(base);
    let flops_before = count_flops(base);
    let layers: Vec<LayerKeep> = base
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
    Ok(profiles
        .iter()
        .map(|p| ClientPlan {
            plan: PruningPlan {
                client_id: p.id,
                ratio,
                client_flops: p.flops,
                f_lambda,
                layers: layers.clone(),
                params_before,
                params_after: count_params(&model),
                flops_before,
                flops_after: count_flops(&model),
            },
            model: model.clone(),
        })
        .collect())
}

/// Training cost proxy in FLOPs: forward + backward approximated as three
/// forward passes per sample per epoch.
fn train_flops(model_flops: u64, samples: u64, epochs: u64) -> f64 {
    3.0 * model_flops as f64 * samples as f64 * epochs as f64
}

struct ClientRoundResult {
    metrics: TrainMetrics,
    test_acc: Option<f64>,
}

fn train_clients(
    clients: &mut [ClientState],
    test_set: Option<&LabeledDataset>,
) -> Result<Vec<ClientRoundResult>> {
    clients
        .par_iter_mut()
        .map(|client| {
            let metrics = local_train(client)?;
            let test_acc = test_set
                .map(|t| evaluate(&client.model, t, 256).map(|(_, acc)| acc))
                .transpose()?;
            Ok(ClientRoundResult { metrics, test_acc })
        })
        .collect()
}

fn client_row(
    round: u32,
    client: &ClientState,
    plan: &PruningPlan,
    result: &ClientRoundResult,
    bytes_down: Option<u64>,
    bytes_up: Option<u64>,
) -> MetricsRow {
    MetricsRow {
        round,
        client_id: client.id.to_string(),
        stage: "client".into(),
        train_loss: Some(result.metrics.final_loss),
        test_acc: result.test_acc,
        bytes_down,
        bytes_up,
        params: Some(count_params(&client.model)),
        flops: Some(count_flops(&client.model)),
        pruning_ratio: Some(plan.ratio),
    }
}

// ---------------------------------------------------------------------------
// One-shot pipeline (static and reft)
// ---------------------------------------------------------------------------

fn run_one_shot(
    config: &ExperimentConfig,
    setup: Setup,
) -> std::result::Result<RunReport, Box<RunFailure>> {
    let Setup { mut clients, mut server, test_set, plans, unpruned_params, mut notes, public_domain } =
        setup;
    let mut rows: Vec<MetricsRow> = Vec::new();
    let mut logit_passes = vec![0u32; clients.len()];

    let finish = |rows: &mut Vec<MetricsRow>,
                  clients: &[ClientState],
                  server: &ServerState,
                  logit_passes: &[u32],
                  results: Option<&[ClientRoundResult]>,
                  final_acc: Option<f64>,
                  final_loss: Option<f64>,
                  notes: &mut Vec<String>| {
        let logits_per_client = vec![server.public.len() as u64; clients.len()];
        let summary = build_summary(config, &server.ledger, unpruned_params, &logits_per_client);
        let outcomes = client_outcomes(config, clients, &plans, results, logit_passes, server);
        RunReport {
            config: config.clone(),
            rows: std::mem::take(rows),
            plans: plans.clone(),
            clients: outcomes,
            final_global_accuracy: final_acc,
            final_global_loss: final_loss,
            summary,
            ledger: server.ledger.clone(),
            public_domain: public_domain.clone(),
            notes: std::mem::take(notes),
        }
    };

    macro_rules! abort {
        ($rows:expr, $clients:expr, $server:expr, $passes:expr, $results:expr, $notes:expr, $err:expr) => {
            return Err(Box::new(RunFailure {
                error: $err,
                partial: finish($rows, $clients, $server, $passes, $results, None, None, $notes),
            }))
        };
    }

    // Stage 1: distribute the pruned models.
    for (client, plan) in clients.iter().zip(&plans) {
        if let Err(e) = record_transfer(
            &mut server.ledger,
            client.id,
            0,
            Direction::Down,
            PayloadKind::Weights,
            plan.params_after,
            &config.cost,
        ) {
            abort!(&mut rows, &clients, &server, &logit_passes, None, &mut notes, e);
        }
    }

    // Stage 2: local training, in parallel.
    let results = match train_clients(&mut clients, test_set.as_ref()) {
        Ok(r) => r,
        Err(e) => abort!(&mut rows, &clients, &server, &logit_passes, None, &mut notes, e),
    };

    // Stage 3: one logit pass per client, importance weighting, offline
    // distillation.
    let counts_per_client: Vec<Vec<u64>> = clients.iter().map(|c| class_counts(&c.data)).collect();
    let class_count = clients.first().map(|c| c.data.classes()).unwrap_or(0);
    let mut counts_matrix = vec![vec![0u64; clients.len()]; class_count];
    for (c, counts) in counts_per_client.iter().enumerate() {
        for (t, &count) in counts.iter().enumerate() {
            counts_matrix[t][c] = count;
        }
    }

    let logits: Vec<LogitMatrix> = {
        let public = &server.public;
        let computed: std::result::Result<Vec<LogitMatrix>, Error> = clients
            .par_iter()
            .map(|client| {
                let coverage: BTreeSet<usize> = class_counts(&client.data)
                    .iter()
                    .enumerate()
                    .filter(|(_, &n)| n > 0)
                    .map(|(t, _)| t)
                    .collect();
                client_logits(&client.model, public, &coverage)
            })
            .collect();
        match computed {
            Ok(l) => l,
            Err(e) => {
                abort!(&mut rows, &clients, &server, &logit_passes, Some(&results), &mut notes, e)
            }
        }
    };
    for (i, (client, matrix)) in clients.iter().zip(&logits).enumerate() {
        logit_passes[i] += 1;
        if let Err(e) = record_transfer(
            &mut server.ledger,
            client.id,
            0,
            Direction::Up,
            PayloadKind::Logits,
            matrix.present_logits(),
            &config.cost,
        ) {
            abort!(&mut rows, &clients, &server, &logit_passes, Some(&results), &mut notes, e);
        }
    }

    for ((client, plan), result) in clients.iter().zip(&plans).zip(&results) {
        let down = server
            .ledger
            .entries()
            .iter()
            .find(|e| e.client == client.id && e.direction == Direction::Down)
            .map(|e| e.bytes);
        let up = server
            .ledger
            .entries()
            .iter()
            .find(|e| e.client == client.id && e.direction == Direction::Up)
            .map(|e| e.bytes);
        rows.push(client_row(0, client, plan, result, down, up));
    }

    let weights = match compute_importance_weights(&counts_matrix) {
        Ok(w) => w,
        Err(e) => abort!(&mut rows, &clients, &server, &logit_passes, Some(&results), &mut notes, e),
    };
    let teacher = match aggregate_teacher_logits(&logits, &weights) {
        Ok(t) => t,
        Err(e) => abort!(&mut rows, &clients, &server, &logit_passes, Some(&results), &mut notes, e),
    };
    let distill_metrics =
        match distill(&mut server, &teacher, derive_seed(config.seed, STREAM_DISTILL)) {
            Ok(m) => m,
            Err(e) => {
                abort!(&mut rows, &clients, &server, &logit_passes, Some(&results), &mut notes, e)
            }
        };

    let (final_loss, final_acc) = match &test_set {
        Some(t) => match evaluate(&server.global, t, 256) {
            Ok((loss, acc)) => (Some(loss), Some(acc)),
            Err(e) => {
                abort!(&mut rows, &clients, &server, &logit_passes, Some(&results), &mut notes, e)
            }
        },
        None => (None, None),
    };
    rows.push(MetricsRow {
        round: 0,
        client_id: "server".into(),
        stage: "distill".into(),
        train_loss: Some(distill_metrics.final_loss),
        test_acc: final_acc,
        bytes_down: None,
        bytes_up: None,
        params: Some(count_params(&server.global)),
        flops: Some(count_flops(&server.global)),
        pruning_ratio: None,
    });

    let report = finish(
        &mut rows,
        &clients,
        &server,
        &logit_passes,
        Some(&results),
        final_acc,
        final_loss,
        &mut notes,
    );
    Ok(report)
}

// ---------------------------------------------------------------------------
// FedAvg
// ---------------------------------------------------------------------------

fn run_fedavg(
    config: &ExperimentConfig,
    setup: Setup,
) -> std::result::Result<RunReport, Box<RunFailure>> {
    let Setup { mut clients, mut server, test_set, plans, unpruned_params, mut notes, public_domain } =
        setup;
    let mut rows: Vec<MetricsRow> = Vec::new();
    let mut last_results: Option<Vec<ClientRoundResult>> = None;
    let mut final_acc = None;
    let mut final_loss = None;
    let mut abort: Option<Error> = None;

    'rounds: for round in 0..config.rounds {
        // Broadcast. Round 0 delivers the plan models already installed in
        // the clients; later rounds deliver the aggregated global model.
        for client in clients.iter_mut() {
            if round > 0 {
                client.model = server.global.clone();
            }
            let params = count_params(&client.model);
            if let Err(e) = record_transfer(
                &mut server.ledger,
                client.id,
                round,
                Direction::Down,
                PayloadKind::Weights,
                params,
                &config.cost,
            ) {
                abort = Some(e);
                break 'rounds;
            }
        }

        let results = match train_clients(&mut clients, test_set.as_ref()) {
            Ok(r) => r,
            Err(e) => {
                abort = Some(e);
                break 'rounds;
            }
        };

        for client in clients.iter() {
            if let Err(e) = record_transfer(
                &mut server.ledger,
                client.id,
                round,
                Direction::Up,
                PayloadKind::Weights,
                count_params(&client.model),
                &config.cost,
            ) {
                abort = Some(e);
                break 'rounds;
            }
        }

        for ((client, plan), result) in clients.iter().zip(&plans).zip(&results) {
            let bytes = server
                .ledger
                .entries()
                .iter()
                .filter(|e| e.client == client.id && e.round == round)
                .map(|e| e.bytes)
                .next();
            rows.push(client_row(round, client, plan, result, bytes, bytes));
        }

        // Aggregate, in client-id order (clients are sorted at setup).
        let models: Vec<&Network<f32>> = clients.iter().map(|c| &c.model).collect();
        let sizes: Vec<u64> = clients.iter().map(ClientState::shard_size).collect();
        match fedavg_aggregate(&models, &sizes) {
            Ok(global) => server.global = global,
            Err(e) => {
                last_results = Some(results);
                abort = Some(e);
                break 'rounds;
            }
        }

        let objective = match global_loss_with_model(&clients, &server.global) {
            Ok(l) => l,
            Err(e) => {
                last_results = Some(results);
                abort = Some(e);
                break 'rounds;
            }
        };
        let acc = match &test_set {
            Some(t) => match evaluate(&server.global, t, 256) {
                Ok((loss, acc)) => {
                    final_loss = Some(loss);
                    Some(acc)
                }
                Err(e) => {
                    last_results = Some(results);
                    abort = Some(e);
                    break 'rounds;
                }
            },
            None => None,
        };
        final_acc = acc;
        rows.push(MetricsRow {
            round,
            client_id: "server".into(),
            stage: "aggregate".into(),
            train_loss: Some(objective),
            test_acc: acc,
            bytes_down: None,
            bytes_up: None,
            params: Some(count_params(&server.global)),
            flops: Some(count_flops(&server.global)),
            pruning_ratio: None,
        });
        last_results = Some(results);
    }

    let logit_passes = vec![0u32; clients.len()];
    let outcomes = client_outcomes(
        config,
        &clients,
        &plans,
        last_results.as_deref(),
        &logit_passes,
        &server,
    );
    let summary = build_summary(config, &server.ledger, unpruned_params, &[]);
    let report = RunReport {
        config: config.clone(),
        rows,
        plans,
        clients: outcomes,
        final_global_accuracy: final_acc,
        final_global_loss: final_loss,
        summary,
        ledger: server.ledger.clone(),
        public_domain,
        notes: std::mem::take(&mut notes),
    };
    match abort {
        Some(error) => Err(Box::new(RunFailure { error, partial: report })),
        None => Ok(report),
    }
}

/// Global objective of one shared model over every client's shard.
fn global_loss_with_model(clients: &[ClientState], model: &Network<f32>) -> Result<f64> {
    let mut stand_ins: Vec<ClientState> = clients.to_vec();
    for c in stand_ins.iter_mut() {
        c.model = model.clone();
    }
    global_loss(&stand_ins)
}

fn client_outcomes(
    config: &ExperimentConfig,
    clients: &[ClientState],
    plans: &[PruningPlan],
    results: Option<&[ClientRoundResult]>,
    logit_passes: &[u32],
    server: &ServerState,
) -> Vec<ClientOutcome> {
    let weakest = clients
        .iter()
        .map(|c| c.profile.flops)
        .fold(f64::INFINITY, f64::min);
    let rounds = match config.strategy {
        Strategy::Fedavg => config.rounds.max(1) as u64,
        _ => 1,
    };
    clients
        .iter()
        .enumerate()
        .map(|(i, client)| {
            let plan = &plans[i];
            let model_flops = count_flops(&client.model);
            let work = train_flops(
                model_flops,
                client.shard_size(),
                config.train.epochs as u64 * rounds,
            );
            ClientOutcome {
                client_id: client.id,
                gflops: client.profile.flops / 1e9,
                pruning_ratio: plan.ratio,
                params: count_params(&client.model),
                flops_per_sample: model_flops,
                test_accuracy: results.and_then(|r| r.get(i)).and_then(|r| r.test_acc),
                bytes_down: server
                    .ledger
                    .entries()
                    .iter()
                    .filter(|e| e.client == client.id && e.direction == Direction::Down)
                    .map(|e| e.bytes)
                    .sum(),
                bytes_up: server
                    .ledger
                    .entries()
                    .iter()
                    .filter(|e| e.client == client.id && e.direction == Direction::Up)
                    .map(|e| e.bytes)
                    .sum(),
                logit_passes: logit_passes[i],
                simulated_train_seconds: simulated_train_time(work, client.profile.flops)
                    .unwrap_or(f64::NAN),
                utilization_static: utilization_factor(weakest, client.profile.flops)
                    .unwrap_or(f64::NAN),
            }
        })
        .collect()
}
