//! PGD and MIM against a freshly trained classifier, with and without SIR
//! scaling.
//!
//!     cargo run --release --example attack_demo

use doa_defense::array::DatasetConfig;
use doa_defense::attack::{attack_success, perturb, AttackConfig, AttackMethod};
use doa_defense::doa_net::{train_baseline, DoaGrid, DoaNetConfig, TrainSchedule};
use doa_defense::harness::simulate_splits;

fn main() -> anyhow::Result<()> {
    let grid = DoaGrid::spanning(-10.0, 10.0, 1.0)?;
    let data = DatasetConfig {
        grid: grid.clone(),
        snr_db: vec![5.0, 10.0],
        samples_per_doa: 8,
        ..DatasetConfig::single_source_default()
    };
    let (train, val) = simulate_splits(&data, 0)?;
    let schedule = TrainSchedule {
        epochs: 6,
        ..TrainSchedule::default()
    };
    let (model, _) = train_baseline(DoaNetConfig::desk(8, 1, grid), &train, &schedule, 0)?;

    let xs: Vec<&[f64]> = val.iter().map(|s| s.tensor.as_slice()).collect();
    let labels: Vec<_> = val.iter().map(|s| s.label.clone()).collect();
    for method in [AttackMethod::Pgd, AttackMethod::Mim] {
        for sir in [None, Some(10.0)] {
            let cfg = AttackConfig {
                target_sir_db: sir,
                ..AttackConfig::evaluation(method)
            };
            let adv = perturb(&xs, &labels, &model, &cfg)?;
            let tensors: Vec<_> = adv
                .iter()
                .map(|a| doa_defense::array::CovarianceTensor::from_vec(8, a.x_adv.clone()))
                .collect::<Result<_, _>>()?;
            let preds = model.predict(&tensors.iter().collect::<Vec<_>>())?;
            let mut hits = 0;
            for (p, l) in preds.iter().zip(&labels) {
                hits += attack_success(&p.decoded_angles_deg, &l.angles_deg, 2.0)? as usize;
            }
            let linf = adv.iter().map(|a| a.linf()).fold(0.0, f64::max);
            let sir_mean = adv.iter().map(|a| a.achieved_sir_db).sum::<f64>() / adv.len() as f64;
            println!(
                "{:<3} sir {:<5} success {:>5.1}%  max |delta| {linf:.3}  mean SIR {sir_mean:.2} dB",
                method.name(),
                sir.map(|s| format!("{s}")).unwrap_or_else(|| "-".into()),
                100.0 * hits as f64 / labels.len() as f64
            );
        }
    }
    Ok(())
}
