use std::path::PathBuf;

use anyhow::Context;
use clap::{Parser, Subcommand};
use doa_defense::attack::{AttackConfig, AttackMethod};
use doa_defense::harness::commands;
use doa_defense::harness::{results_root, ReportFormat};

#[derive(Parser)]
#[command(
    version,
    about = "Adversarial attacks and input purification for DOA networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a training container (plus `val/` when enabled).
    GenData {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train the baseline grid classifier.
    TrainDoa {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Write an adversarial container and an attack report.
    Attack {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "pgd")]
        method: AttackMethod,
        #[arg(long, default_value_t = 10)]
        steps: usize,
        #[arg(long, default_value_t = 0.02)]
        step_size: f64,
        #[arg(long, default_value_t = 0.2)]
        eps: f64,
        /// Target signal-to-interference ratio in dB; omit to skip scaling.
        #[arg(long)]
        sir: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        momentum_decay: f64,
        #[arg(long, default_value_t = 2.0)]
        zeta: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the purification network on paired containers.
    TrainDefense {
        #[arg(long)]
        clean: PathBuf,
        #[arg(long)]
        adv: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0.25)]
        alpha: f64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run an evaluation sweep; writes results.csv and welch.csv.
    Evaluate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Regenerate the CSV table or figures from a results directory.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value = "csv")]
        format: ReportFormat,
    },
}

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::GenData { config, out, seed } => {
            let m = commands::gen_data(&config, &out, seed).context("gen-data")?;
            println!("wrote {} samples to {}", m.sample_count, out.display());
        }
        Command::TrainDoa {
            data,
            config,
            out,
            seed,
        } => {
            let log = commands::train_doa(&data, &config, &out, seed).context("train-doa")?;
            if let Some(l) = log.epoch_losses.last() {
                println!("final epoch loss {l:.5}; checkpoint in {}", out.display());
            }
        }
        Command::Attack {
            model,
            data,
            method,
            steps,
            step_size,
            eps,
            sir,
            momentum_decay,
            zeta,
            out,
        } => {
            let cfg = AttackConfig {
                method,
                steps,
                step_size,
                eps,
                momentum_decay,
                target_sir_db: sir,
            };
            let r = commands::attack(&model, &data, &cfg, zeta, &out).context("attack")?;
            println!(
                "success rate {:.2}% over {} samples",
                100.0 * r.success_rate,
                r.samples.len()
            );
        }
        Command::TrainDefense {
            clean,
            adv,
            config,
            alpha,
            out,
            seed,
        } => {
            let log = commands::train_defense_cmd(&clean, &adv, &config, alpha, &out, seed)
                .context("train-defense")?;
            for e in &log.epochs {
                println!(
                    "epoch {:>3}  lr {:.2e}  train {:.5}  val recon {:.5}  val adv {:.5}",
                    e.epoch, e.learning_rate, e.train_loss, e.val_recon, e.val_adv_recon
                );
            }
        }
        Command::Evaluate { config, out, seed } => {
            let out = out.unwrap_or_else(|| results_root().join("evaluate"));
            let r = commands::evaluate(&config, &out, seed).context("evaluate")?;
            println!("{} rows written to {}", r.rows.len(), out.display());
        }
        Command::Report { input, format } => {
            for p in commands::report(&input, format).context("report")? {
                println!("{}", p.display());
            }
        }
    }
    Ok(())
}
