//! Subspace estimation on simulated scenes, as a classical reference.
//!
//!     cargo run --example esprit

use doa_defense::array::{
    collect_snapshots, sample_covariance, ArrayGeometry, Modulation, SourceScenario,
};
use doa_defense::classical::esprit_estimate;

fn main() -> anyhow::Result<()> {
    let geometry = ArrayGeometry::ula(8);
    for (angles, snr) in [
        (vec![10.0], 10.0),
        (vec![-20.0, 15.0], 10.0),
        (vec![4.0, 7.0], -1.0),
    ] {
        let scene = SourceScenario::new(angles.clone(), Modulation::Bpsk, snr, 1024)?;
        let r = sample_covariance(&collect_snapshots(&scene, &geometry, 3)?)?;
        let est = esprit_estimate(&r, angles.len(), &geometry)?;
        let shown: Vec<String> = est.angles_deg.iter().map(|a| format!("{a:.2}")).collect();
        println!(
            "truth {angles:?} at {snr} dB -> [{}]  eigengap {:.1}",
            shown.join(", "),
            est.eigengap
        );
    }
    match esprit_estimate(
        &sample_covariance(&collect_snapshots(
            &SourceScenario::new(vec![0.0], Modulation::Bpsk, 10.0, 256)?,
            &ArrayGeometry::sparse8(),
            0,
        )?)?,
        1,
        &ArrayGeometry::sparse8(),
    ) {
        Err(e) => println!("sparse array: {e}"),
        Ok(_) => unreachable!("sparse geometry has no shift invariance"),
    }
    Ok(())
}
