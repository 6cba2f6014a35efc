//! Finite-difference gradient checks shared by the integration tests.
#![allow(dead_code)]

use candle_core::{DType, Device, Tensor, Var};
use doa_defense::defense::DefTransformer;
use doa_defense::doa_net::DoaClassifier;
use doa_defense::nn::ParamStore;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Central-difference step in f64.
const H: f64 = 1e-5;
/// Derivatives smaller than this fraction of the readout (at least 1) are
/// compared absolutely: central differences cannot resolve them past
/// round-off, and some are exactly zero (e.g. softmax-invariant key biases).
const FLOOR: f64 = 1e-6;

pub fn rel_err(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

#[derive(Debug, Default)]
pub struct GradCheck {
    pub probes: usize,
    pub worst: f64,
    floor: f64,
}

impl GradCheck {
    fn record(&mut self, analytic: f64, numeric: f64) {
        self.probes += 1;
        self.worst = self.worst.max(rel_err(analytic, numeric, self.floor));
    }
}

fn scalar(t: &Tensor) -> f64 {
    t.to_dtype(DType::F64).unwrap().to_scalar::<f64>().unwrap()
}

fn flat(t: &Tensor) -> Vec<f64> {
    t.flatten_all().unwrap().to_vec1::<f64>().unwrap()
}

/// Compare `d readout / d x` and `d readout / d θ` against central
/// differences at `probes` random input coordinates and `probes` random
/// parameter coordinates.
pub fn check<F>(
    readout: F,
    x: &[f64],
    shape: &[usize],
    params: &ParamStore,
    probes: usize,
    seed: u64,
) -> GradCheck
where
    F: Fn(&Tensor) -> Tensor,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let var =
        Var::from_tensor(&Tensor::from_vec(x.to_vec(), shape, &Device::Cpu).unwrap()).unwrap();
    let grads = readout(var.as_tensor()).backward().unwrap();
    let gx = flat(grads.get(var.as_tensor()).expect("input gradient"));
    let eval = |v: Vec<f64>| scalar(&readout(&Tensor::from_vec(v, shape, &Device::Cpu).unwrap()));

    let mut out = GradCheck {
        floor: FLOOR * eval(x.to_vec()).abs().max(1.0),
        ..GradCheck::default()
    };
    for _ in 0..probes {
        let i = rng.random_range(0..x.len());
        let (mut up, mut down) = (x.to_vec(), x.to_vec());
        up[i] += H;
        down[i] -= H;
        out.record(gx[i], (eval(up) - eval(down)) / (2.0 * H));
    }

    let named: Vec<(String, Var)> = params
        .iter()
        .map(|(n, v)| (n.to_string(), v.clone()))
        .collect();
    let x_t = Tensor::from_vec(x.to_vec(), shape, &Device::Cpu).unwrap();
    for _ in 0..probes {
        let (_, p) = &named[rng.random_range(0..named.len())];
        let Some(g) = grads.get(p.as_tensor()) else {
            continue;
        };
        let g = flat(g);
        let orig = p.as_tensor().copy().unwrap();
        let base = flat(&orig);
        let i = rng.random_range(0..base.len());
        let at = |delta: f64| {
            let mut v = base.clone();
            v[i] += delta;
            p.set(&Tensor::from_vec(v, orig.shape(), &Device::Cpu).unwrap())
                .unwrap();
            let y = scalar(&readout(&x_t));
            p.set(&orig).unwrap();
            y
        };
        out.record(g[i], (at(H) - at(-H)) / (2.0 * H));
    }
    out
}

pub fn uniform(n: usize, lo: f64, hi: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

/// Sum of logits of a (1, 3, M, M) probe.
pub fn check_doa_net(model: &DoaClassifier, probes: usize, seed: u64) -> GradCheck {
    let m = model.config().elements;
    let x = uniform(3 * m * m, -1.0, 1.0, seed);
    check(
        |t| model.forward(t).unwrap().sum_all().unwrap(),
        &x,
        &[1, 3, m, m],
        model.params(),
        probes,
        seed + 1,
    )
}

/// Random linear readout of the reconstruction of a (1, 3, M, M) probe.
pub fn check_def_transformer(model: &DefTransformer, probes: usize, seed: u64) -> GradCheck {
    let m = model.config().elements;
    let x = uniform(3 * m * m, -1.0, 1.0, seed);
    let w = Tensor::from_vec(
        uniform(3 * m * m, -1.0, 1.0, seed + 2),
        (1, 3, m, m),
        &Device::Cpu,
    )
    .unwrap();
    check(
        |t| {
            (model.reconstruct(t).unwrap() * &w)
                .unwrap()
                .sum_all()
                .unwrap()
        },
        &x,
        &[1, 3, m, m],
        model.params(),
        probes,
        seed + 1,
    )
}
