//! `fedsim`: run federated simulation experiments, emit structural pruning
//! tables, and compare strategies.
//!
//! Exit codes: 0 success, 1 configuration error, 2 runtime abort.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fedsim_core::config::ExperimentConfig;
use fedsim_core::error::Error;
use fedsim_core::nn::models::ModelId;
use fedsim_core::report::{compare, execute_run, prune_report};

#[derive(Parser)]
#[command(
    name = "fedsim",
    version,
    about = "Deterministic federated-learning simulator with capacity-proportional \
             pruning, one-shot distillation, and bandwidth accounting"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute one experiment config and write report/CSV artifacts.
    Run {
        /// Experiment config (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides the config's out_dir).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the run seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads for client training (default: all cores).
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Structurally prune a reference model at several ratios and tabulate
    /// parameters, FLOPs, and serialized size.
    PruneReport {
        /// Model id: mlp-small, cnn-small, resnet8, or vgg16.
        #[arg(long)]
        model: String,
        /// Comma-separated pruning ratios in [0, 1).
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.0, 0.3, 0.6, 0.9])]
        ratios: Vec<f64>,
        /// Also write the table as CSV into this directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Weight-initialization seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run several configs over one dataset seed and emit an aligned CSV.
    Compare {
        /// Experiment configs (repeat the flag; dataset blocks and seeds
        /// must match).
        #[arg(long = "config", required = true)]
        configs: Vec<PathBuf>,
        /// Output directory.
        #[arg(long, default_value = "runs/compare")]
        out: PathBuf,
        /// Override every config's seed (keeps them aligned).
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads for client training.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Parse and validate a config, echoing the resolved form.
    ValidateConfig {
        #[arg(long)]
        config: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn exit_code_for(error: &Error) -> u8 {
    match error {
        Error::ConfigInvalid { .. } | Error::ConfigParse { .. } | Error::InvalidArgument(_) => 1,
        _ => 2,
    }
}

fn dispatch(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Run { config, out, seed, threads } => {
            let mut cfg = ExperimentConfig::from_path(&config)?;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            let (report, artifacts) = execute_run(&cfg, threads, out.as_deref())?;
            println!(
                "run complete: strategy={} clients={} ledger={} bytes",
                cfg.strategy.as_str(),
                cfg.clients.len(),
                report.ledger.total_bytes()
            );
            if let Some(acc) = report.final_global_accuracy {
                println!("final global accuracy: {acc:.4}");
            }
            for c in &report.clients {
                println!(
                    "client {}: ratio={:.2} params={} acc={} down={}B up={}B",
                    c.client_id,
                    c.pruning_ratio,
                    c.params,
                    c.test_accuracy.map(|a| format!("{a:.4}")).unwrap_or_else(|| "-".into()),
                    c.bytes_down,
                    c.bytes_up
                );
            }
            println!("artifacts: {}", artifacts.report_json.display());
            Ok(())
        }
        Command::PruneReport { model, ratios, out, seed } => {
            let model: ModelId = model.parse()?;
            let report = prune_report(model, &ratios, seed)?;
            println!(
                "model {} (input {:?}, {} classes); flops are per sample, 1 MAC = 1 FLOP \
                 (flops_mac2 = multiply and add counted separately)",
                report.model, report.input_shape, report.classes
            );
            println!(
                "{:>6} {:>12} {:>14} {:>14} {:>12} {:>10} {:>16}",
                "ratio", "params", "flops_mac1", "flops_mac2", "bytes", "MB", "linear_params"
            );
            for row in &report.rows {
                println!(
                    "{:>6.2} {:>12} {:>14} {:>14} {:>12} {:>10.3} {:>16.0}",
                    row.ratio,
                    row.params,
                    row.flops_mac1,
                    row.flops_mac2,
                    row.serialized_bytes,
                    row.serialized_mb,
                    row.expected_linear_params
                );
            }
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir)?;
                let path = dir.join(format!("prune-report-{}.csv", report.model));
                std::fs::write(&path, report.csv())?;
                println!("wrote {}", path.display());
            }
            Ok(())
        }
        Command::Compare { configs, out, seed, threads } => {
            let mut parsed = Vec::with_capacity(configs.len());
            for path in &configs {
                let mut cfg = ExperimentConfig::from_path(path)?;
                if let Some(seed) = seed {
                    cfg.seed = seed;
                }
                parsed.push(cfg);
            }
            let path = compare(&parsed, threads, &out)?;
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::ValidateConfig { config } => {
            let cfg = ExperimentConfig::from_path(&config)?;
            println!("{}", cfg.to_json());
            Ok(())
        }
    }
}
