//! Train a small purifier on attacked inputs and compare reconstruction
//! error before and after.
//!
//!     cargo run --release --example purify

use doa_defense::array::DatasetConfig;
use doa_defense::attack::AttackConfig;
use doa_defense::defense::{train_defense, validation_losses, DefTransformerConfig, LrSchedule};
use doa_defense::doa_net::{train_baseline, DoaGrid, DoaNetConfig, TrainSchedule};
use doa_defense::harness::{defense_data, simulate_splits};

fn main() -> anyhow::Result<()> {
    let grid = DoaGrid::spanning(-8.0, 8.0, 1.0)?;
    let data = DatasetConfig {
        grid: grid.clone(),
        snr_db: vec![5.0, 10.0],
        samples_per_doa: 8,
        ..DatasetConfig::single_source_default()
    };
    let (train, val) = simulate_splits(&data, 0)?;
    let schedule = TrainSchedule {
        epochs: 5,
        ..TrainSchedule::default()
    };
    let (baseline, _) = train_baseline(DoaNetConfig::desk(8, 1, grid), &train, &schedule, 0)?;
    let pairs = defense_data(&baseline, &train, &val, &AttackConfig::training())?;

    let cfg = DefTransformerConfig::desk(8);
    let (defense, log) = train_defense(
        cfg,
        &pairs.train,
        &pairs.validation,
        &schedule,
        LrSchedule::HalveEvery5,
        0,
    )?;
    for e in &log.epochs {
        println!(
            "epoch {}: lr {:.1e}  train {:.4}  val clean {:.4}  val adv {:.4}",
            e.epoch, e.learning_rate, e.train_loss, e.val_recon, e.val_adv_recon
        );
    }
    let (recon, adv) = validation_losses(&defense, &pairs.validation)?;
    println!("final validation l1: clean {recon:.4}, adversarial {adv:.4}");
    println!("parameters: {}", defense.params().num_params());
    Ok(())
}
