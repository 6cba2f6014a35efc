//! Train a small grid classifier on a narrow sector and check it on fresh
//! scenes.
//!
//!     cargo run --release --example train_baseline

use doa_defense::array::{DatasetConfig, Sample};
use doa_defense::doa_net::{train_baseline, DoaGrid, DoaNetConfig, TrainSchedule};
use doa_defense::harness::{accuracy, rmse, simulate_splits};

fn main() -> anyhow::Result<()> {
    let grid = DoaGrid::spanning(-10.0, 10.0, 1.0)?;
    let data = DatasetConfig {
        grid: grid.clone(),
        snr_db: vec![0.0, 5.0, 10.0],
        samples_per_doa: 10,
        ..DatasetConfig::single_source_default()
    };
    let (train, val) = simulate_splits(&data, 0)?;
    let net = DoaNetConfig::desk(8, 1, grid);
    let schedule = TrainSchedule {
        epochs: 8,
        ..TrainSchedule::default()
    };
    let (model, log) = train_baseline(net, &train, &schedule, 0)?;
    for (i, l) in log.epoch_losses.iter().enumerate() {
        println!("epoch {:>2}: loss {l:.4}", i + 1);
    }
    let refs: Vec<_> = val.iter().map(|s: &Sample| &s.tensor).collect();
    let pred: Vec<Vec<f64>> = model
        .predict(&refs)?
        .into_iter()
        .map(|p| p.decoded_angles_deg)
        .collect();
    let truth: Vec<Vec<f64>> = val.iter().map(|s| s.label.angles_deg.clone()).collect();
    println!(
        "validation: rmse {:.3} deg, accuracy {:.1}%",
        rmse(&pred, &truth)?,
        accuracy(&pred, &truth, 2.0)?
    );
    Ok(())
}
