use std::fs;
use std::path::Path;
use std::process::Command;

use doa_defense::array::read_container;
use doa_defense::harness::commands::{AttackReport, ATTACK_REPORT_FILE};
use doa_defense::harness::{read_results, RESULTS_FILE, WELCH_FILE};
use serde_json::json;

fn run(args: &[&str], dir: &Path) {
    let out = Command::new(env!("CARGO_BIN_EXE_doa-defense"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn write(dir: &Path, name: &str, value: serde_json::Value) {
    fs::write(dir.join(name), serde_json::to_vec_pretty(&value).unwrap()).unwrap();
}

#[test]
fn full_cli_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    write(
        d,
        "data.json",
        json!({
            "num_sources": 1,
            "snr_db": [5.0, 10.0],
            "grid": {"start_deg": -3.0, "step_deg": 1.0, "count": 7},
            "samples_per_doa": 4,
            "snapshots": 256,
            "modulation": "BPSK",
            "geometry": {"positions": [0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0]}
        }),
    );
    write(
        d,
        "doa.json",
        json!({
            "architecture": {"conv_channels": [8, 8], "kernel_size": 3, "hidden_units": 32},
            "schedule": {"epochs": 2, "batch_size": 16, "learning_rate": 0.001}
        }),
    );
    write(
        d,
        "defense.json",
        json!({
            "model": {
                "elements": 8, "embed_dim": 16, "stages": 1, "layers_per_stage": 2, "window": 8,
                "anchor_downsample": 2, "mlp_ratio": 2, "loss_weight": 0.25, "reconstruction_norm": "l1"
            },
            "schedule": {"epochs": 1, "batch_size": 16, "learning_rate": 0.001}
        }),
    );
    write(
        d,
        "eval.json",
        json!({
            "num_sources": 1,
            "sweep": {"axis": "snr", "values": [5.0, 10.0]},
            "test_angles": {"start_deg": -2.5, "stop_deg": 2.5, "step_deg": 1.0, "separation_deg": null},
            "samples_per_doa": 2,
            "attack": {"method": "pgd", "steps": 3, "step_size": 0.02, "eps": 0.2, "momentum_decay": 1.0, "target_sir_db": 10.0},
            "baseline_checkpoint": "doa_ckpt",
            "defense_checkpoint": "def_ckpt"
        }),
    );

    run(
        &[
            "gen-data",
            "--config",
            "data.json",
            "--out",
            "data",
            "--seed",
            "3",
        ],
        d,
    );
    let (manifest, samples) = read_container(&d.join("data")).unwrap();
    assert_eq!(manifest.sample_count, 7 * 2 * 4);
    assert_eq!(samples.len(), manifest.sample_count);
    assert!(d.join("data/val/manifest.json").exists());

    run(
        &[
            "train-doa",
            "--data",
            "data",
            "--config",
            "doa.json",
            "--out",
            "doa_ckpt",
            "--seed",
            "1",
        ],
        d,
    );
    run(
        &[
            "attack",
            "--model",
            "doa_ckpt",
            "--data",
            "data",
            "--method",
            "mim",
            "--steps",
            "3",
            "--step-size",
            "0.02",
            "--eps",
            "0.2",
            "--sir",
            "10",
            "--out",
            "adv",
        ],
        d,
    );
    let report: AttackReport =
        serde_json::from_slice(&fs::read(d.join("adv").join(ATTACK_REPORT_FILE)).unwrap()).unwrap();
    assert_eq!(report.samples.len(), manifest.sample_count);
    assert!(report
        .samples
        .iter()
        .all(|r| r.achieved_sir_db.map_or(true, |s| (s - 10.0).abs() < 1e-6)));
    let (adv_manifest, adv) = read_container(&d.join("adv")).unwrap();
    assert!(adv_manifest.provenance.is_some());
    assert_eq!(adv.len(), samples.len());

    run(
        &[
            "train-defense",
            "--clean",
            "data",
            "--adv",
            "adv",
            "--config",
            "defense.json",
            "--alpha",
            "0.25",
            "--out",
            "def_ckpt",
            "--seed",
            "2",
        ],
        d,
    );
    run(
        &[
            "evaluate",
            "--config",
            "eval.json",
            "--out",
            "results",
            "--seed",
            "4",
        ],
        d,
    );
    let rows = read_results(&d.join("results")).unwrap();
    assert_eq!(rows.len(), 2 * 5);
    assert!(d.join("results").join(WELCH_FILE).exists());

    run(&["report", "--in", "results", "--format", "plots"], d);
    for metric in ["rmse", "accuracy", "confidence"] {
        assert!(d.join(format!("results/snr_{metric}.png")).exists());
    }
    run(&["report", "--in", "results", "--format", "csv"], d);
    assert!(d.join("results").join(RESULTS_FILE).exists());
}

#[test]
fn bad_inputs_fail_cleanly() {
    let tmp = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_doa-defense"))
        .args(["report", "--in", "nowhere", "--format", "svg"])
        .current_dir(tmp.path())
        .output()
        .unwrap();
    assert!(!out.status.success());
    let out = Command::new(env!("CARGO_BIN_EXE_doa-defense"))
        .args(["evaluate", "--config", "missing.json", "--out", "r"])
        .current_dir(tmp.path())
        .output()
        .unwrap();
    assert!(!out.status.success());
}
