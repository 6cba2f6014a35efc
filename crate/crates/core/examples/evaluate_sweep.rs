//! Evaluate saved checkpoints over an SNR sweep and write the tables and
//! figures.
//!
//!     cargo run --release --example end_to_end out
//!     cargo run --release --example evaluate_sweep out

use std::path::PathBuf;

use doa_defense::harness::{
    emit_report, run_experiment, welch_to_csv, ExperimentConfig, ReportFormat, TestAngles,
    WELCH_FILE,
};

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| "results/end_to_end".into());
    let mut cfg = ExperimentConfig::snr_sweep(1, vec![-4.0, 0.0, 4.0, 8.0]);
    cfg.test_angles = TestAngles {
        start_deg: -19.5,
        stop_deg: 19.5,
        step_deg: 1.0,
        separation_deg: None,
    };
    cfg.baseline_checkpoint = Some(dir.join("baseline"));
    cfg.defense_checkpoint = Some(dir.join("defense"));
    println!("{}", serde_json::to_string_pretty(&cfg)?);

    let result = run_experiment(&cfg)?;
    let out = dir.join("snr_sweep");
    emit_report(&result.rows, ReportFormat::Csv, &out)?;
    std::fs::write(out.join(WELCH_FILE), welch_to_csv(&result.welch)?)?;
    for p in emit_report(&result.rows, ReportFormat::Plots, &out)? {
        println!("wrote {}", p.display());
    }
    for w in &result.welch {
        println!(
            "{}: {} t={:.3} p={:.3}",
            w.condition, w.comparison, w.t, w.p
        );
    }
    Ok(())
}
