mod common;

use candle_core::DType;
use common::{check_def_transformer, check_doa_net};
use doa_defense::defense::{DefTransformer, DefTransformerConfig};
use doa_defense::doa_net::{DoaClassifier, DoaGrid, DoaNetConfig};

#[test]
fn doa_net_matches_finite_differences() {
    let cfg = DoaNetConfig::desk(8, 1, DoaGrid::spanning(-10.0, 10.0, 1.0).unwrap());
    let model = DoaClassifier::new(cfg, DType::F64, 4).unwrap();
    let r = check_doa_net(&model, 12, 9);
    assert!(r.probes >= 20 && r.worst < 1e-3, "{r:?}");
}

#[test]
fn dual_source_doa_net_matches_finite_differences() {
    let cfg = DoaNetConfig::desk(8, 2, DoaGrid::dual_source());
    let model = DoaClassifier::new(cfg, DType::F64, 5).unwrap();
    let r = check_doa_net(&model, 10, 1);
    assert!(r.worst < 1e-3, "{r:?}");
}

#[test]
fn def_transformer_matches_finite_differences() {
    for (cfg, seed) in [
        (DefTransformerConfig::desk(8), 0),
        (DefTransformerConfig::desk(5), 1),
        (
            DefTransformerConfig {
                window_attention: false,
                ..DefTransformerConfig::desk(8)
            },
            2,
        ),
    ] {
        let model = DefTransformer::new(cfg, DType::F64, seed).unwrap();
        let r = check_def_transformer(&model, 10, seed + 7);
        assert!(r.worst < 1e-3, "{r:?}");
    }
}
