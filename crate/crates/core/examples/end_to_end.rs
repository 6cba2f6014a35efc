//! Train the desk-scale baseline and defense, then evaluate both attacks at
//! 6 dB SNR.
//!
//!     cargo run --release --example end_to_end [out_dir]

use std::path::PathBuf;
use std::time::Instant;

use doa_defense::attack::{AttackConfig, AttackMethod};
use doa_defense::harness::{
    emit_report, run_experiment_with_models, train_pipeline, ExperimentConfig, PipelineConfig,
    ReportFormat, TestAngles,
};

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| "results/end_to_end".into());

    let cfg = PipelineConfig::desk_single_source();
    let start = Instant::now();
    let trained = train_pipeline(&cfg)?;
    println!("training took {:.1?}", start.elapsed());
    for e in &trained.defense_log.epochs {
        println!(
            "defense epoch {:>2}: train {:.4}  val recon {:.4}  val adv recon {:.4}",
            e.epoch, e.train_loss, e.val_recon, e.val_adv_recon
        );
    }
    trained.baseline.save(&out.join("baseline"))?;
    trained.defense.save(&out.join("defense"))?;

    let mut rows = Vec::new();
    for method in [AttackMethod::Pgd, AttackMethod::Mim] {
        let mut exp = ExperimentConfig::snr_sweep(1, vec![6.0]);
        exp.test_angles = TestAngles {
            start_deg: -19.5,
            stop_deg: 19.5,
            step_deg: 1.0,
            separation_deg: None,
        };
        exp.attack = AttackConfig::evaluation(method);
        exp.seed = 1;
        let result = run_experiment_with_models(&exp, &trained.baseline, Some(&trained.defense))?;
        for mut r in result.rows {
            r.method = format!("{}/{}", method.name(), r.method);
            println!(
                "{:<22} rmse {:>7.3}  acc {:>6.2}%  conf {}",
                r.method,
                r.rmse,
                r.accuracy,
                r.confidence
                    .map(|c| format!("{c:.1}%"))
                    .unwrap_or_else(|| "-".into())
            );
            rows.push(r);
        }
    }
    emit_report(&rows, ReportFormat::Csv, &out)?;
    println!("wrote {}", out.display());
    Ok(())
}
