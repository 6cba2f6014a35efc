//! Simulate one scene, encode its covariance tensor and plan a dataset.
//!
//!     cargo run --example simulate_array

use doa_defense::array::{
    collect_snapshots, encode_covariance_tensor, sample_covariance, ArrayGeometry, DatasetConfig,
    DatasetManifest, Modulation, SourceScenario, Split,
};

fn main() -> anyhow::Result<()> {
    let geometry = ArrayGeometry::ula(8);
    let scene = SourceScenario::new(vec![-12.0, 30.0], Modulation::Qam16, 5.0, 1024)?;
    let x = collect_snapshots(&scene, &geometry, 7)?;
    let r = sample_covariance(&x)?;
    let t = encode_covariance_tensor(&r)?;
    println!(
        "{} elements, {} snapshots -> tensor {:?}",
        x.elements(),
        x.snapshots(),
        t.shape()
    );
    println!("tensor power {:.4}", t.power());
    for row in 0..3 {
        let cells: Vec<String> = (0..4)
            .map(|c| format!("{:+.3}", t.get(0, row, c)))
            .collect();
        println!("real[{row}][0..4] = {}", cells.join(" "));
    }

    for cfg in [
        DatasetConfig::single_source_default(),
        DatasetConfig::dual_source_default(),
    ] {
        let m = DatasetManifest::plan(&cfg, Split::Train, 0)?;
        println!(
            "L={}: {} directions x {} SNRs -> {} training samples",
            cfg.num_sources,
            cfg.doa_sets().len(),
            cfg.snr_db.len(),
            m.sample_count
        );
    }
    Ok(())
}
