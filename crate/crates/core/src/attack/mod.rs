//! White-box sign-gradient attacks on the model input, with SIR budgeting.
//!
//! All arithmetic is done in `f64` on flat input slices so the ℓ∞
//! projection is exact regardless of the model's compute dtype.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Anything whose per-sample loss can be differentiated w.r.t. its input.
pub trait AttackTarget {
    type Label;

    /// Per-sample losses and input gradients for a batch.
    fn loss_and_gradient(
        &self,
        inputs: &[&[f64]],
        labels: &[Self::Label],
    ) -> Result<(Vec<f64>, Vec<Vec<f64>>)>;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttackMethod {
    Pgd,
    Mim,
}

impl AttackMethod {
    pub fn name(self) -> &'static str {
        match self {
            Self::Pgd => "PGD",
            Self::Mim => "MIM",
        }
    }
}

impl std::str::FromStr for AttackMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pgd" => Ok(Self::Pgd),
            "mim" => Ok(Self::Mim),
            other => Err(crate::error::config(format!(
                "unknown attack method '{other}'"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackConfig {
    pub method: AttackMethod,
    pub steps: usize,
    pub step_size: f64,
    pub eps: f64,
    /// Momentum decay ω, used by MIM only.
    pub momentum_decay: f64,
    /// SIR budget in dB; `None` leaves the raw iterate unscaled.
    pub target_sir_db: Option<f64>,
}

impl AttackConfig {
    /// 5-step PGD, ψ = 0.02, ε = 0.2, 10 dB SIR: the setting used to build
    /// defense training pairs.
    pub fn training() -> Self {
        Self {
            method: AttackMethod::Pgd,
            steps: 5,
            step_size: 0.02,
            eps: 0.2,
            momentum_decay: 1.0,
            target_sir_db: Some(10.0),
        }
    }

    /// 10-step evaluation attack with ω = 1.
    pub fn evaluation(method: AttackMethod) -> Self {
        Self {
            method,
            steps: 10,
            ..Self::training()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0) || !(self.eps > 0.0) || !(self.momentum_decay >= 0.0) {
            return Err(crate::error::config(
                "attack needs step_size > 0, eps > 0 and momentum_decay >= 0",
            ));
        }
        if self.target_sir_db.is_some_and(f64::is_nan) {
            return Err(crate::error::config("target SIR is NaN"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdversarialSample {
    pub x_adv: Vec<f64>,
    pub delta: Vec<f64>,
    /// `+inf` when the perturbation is zero.
    pub achieved_sir_db: f64,
}

impl AdversarialSample {
    fn from_pair(x: &[f64], x_adv: Vec<f64>) -> Self {
        let delta: Vec<f64> = x_adv.iter().zip(x).map(|(a, c)| a - c).collect();
        let achieved_sir_db = sir_db(x, &delta);
        Self {
            x_adv,
            delta,
            achieved_sir_db,
        }
    }

    pub fn linf(&self) -> f64 {
        self.delta.iter().fold(0.0, |m, d| m.max(d.abs()))
    }
}

fn power(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>() / v.len().max(1) as f64
}

/// `10 log10(P_clean / P_pert)`.
pub fn sir_db(clean: &[f64], delta: &[f64]) -> f64 {
    let pp = power(delta);
    if pp == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (power(clean) / pp).log10()
    }
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Run the configured iteration on a batch and return the final iterates
/// (before any SIR scaling).
pub fn attack_batch<T: AttackTarget>(
    xs: &[&[f64]],
    labels: &[T::Label],
    model: &T,
    cfg: &AttackConfig,
) -> Result<Vec<AdversarialSample>> {
    cfg.validate()?;
    if xs.len() != labels.len() {
        return Err(domain("input and label counts differ"));
    }
    let mut cur: Vec<Vec<f64>> = xs.iter().map(|x| x.to_vec()).collect();
    let mut momentum: Vec<Vec<f64>> = xs.iter().map(|x| vec![0.0; x.len()]).collect();
    for step in 0..cfg.steps {
        let views: Vec<&[f64]> = cur.iter().map(Vec::as_slice).collect();
        let (_, grads) = model.loss_and_gradient(&views, labels)?;
        for (b, grad) in grads.iter().enumerate() {
            if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
                return Err(Error::Attack(format!(
                    "non-finite gradient {} at step {step}, sample {b}, element {i}",
                    grad[i]
                )));
            }
            let direction: &[f64] = match cfg.method {
                AttackMethod::Pgd => grad,
                AttackMethod::Mim => {
                    let l1: f64 = grad.iter().map(|g| g.abs()).sum();
                    let inv = if l1 > 0.0 { 1.0 / l1 } else { 0.0 };
                    for (m, g) in momentum[b].iter_mut().zip(grad) {
                        *m = cfg.momentum_decay * *m + g * inv;
                    }
                    &momentum[b]
                }
            };
            let x0 = xs[b];
            for ((v, d), &c) in cur[b].iter_mut().zip(direction).zip(x0) {
                *v = (*v + cfg.step_size * sign(*d)).clamp(c - cfg.eps, c + cfg.eps);
            }
        }
    }
    Ok(xs
        .iter()
        .zip(cur)
        .map(|(x, adv)| AdversarialSample::from_pair(x, adv))
        .collect())
}

fn single<T: AttackTarget>(
    x: &[f64],
    label: T::Label,
    model: &T,
    cfg: &AttackConfig,
    method: AttackMethod,
) -> Result<AdversarialSample> {
    let cfg = AttackConfig {
        method,
        ..cfg.clone()
    };
    Ok(attack_batch(&[x], &[label], model, &cfg)?.remove(0))
}

/// Projected gradient ascent: `x <- clip_eps(x + ψ sign(∇L))`.
pub fn pgd<T: AttackTarget>(
    x: &[f64],
    label: T::Label,
    model: &T,
    cfg: &AttackConfig,
) -> Result<AdversarialSample> {
    single(x, label, model, cfg, AttackMethod::Pgd)
}

/// Momentum iterative attack with ℓ1-normalised gradient accumulation,
/// clipped into the ε ball after each step.
pub fn mim<T: AttackTarget>(
    x: &[f64],
    label: T::Label,
    model: &T,
    cfg: &AttackConfig,
) -> Result<AdversarialSample> {
    single(x, label, model, cfg, AttackMethod::Mim)
}

/// Rescale the perturbation alone so that the clean-to-perturbation power
/// ratio equals `target_sir_db`. A zero perturbation is returned unchanged.
pub fn scale_to_sir(
    x_clean: &[f64],
    x_adv: &[f64],
    target_sir_db: f64,
) -> Result<AdversarialSample> {
    if x_clean.len() != x_adv.len() {
        return Err(domain("clean and adversarial inputs differ in length"));
    }
    if target_sir_db.is_nan() {
        return Err(domain("target SIR is NaN"));
    }
    let delta: Vec<f64> = x_adv.iter().zip(x_clean).map(|(a, c)| a - c).collect();
    let pp = power(&delta);
    if pp == 0.0 || target_sir_db == f64::INFINITY {
        return Ok(AdversarialSample {
            x_adv: x_clean.to_vec(),
            delta: vec![0.0; x_clean.len()],
            achieved_sir_db: f64::INFINITY,
        });
    }
    let scale = (power(x_clean) / (pp * 10f64.powf(target_sir_db / 10.0))).sqrt();
    let delta: Vec<f64> = delta.iter().map(|d| d * scale).collect();
    let x_adv = x_clean.iter().zip(&delta).map(|(c, d)| c + d).collect();
    let achieved_sir_db = sir_db(x_clean, &delta);
    Ok(AdversarialSample {
        x_adv,
        delta,
        achieved_sir_db,
    })
}

/// Full attack: iterate, then apply the SIR budget if one is set.
pub fn perturb<T: AttackTarget>(
    xs: &[&[f64]],
    labels: &[T::Label],
    model: &T,
    cfg: &AttackConfig,
) -> Result<Vec<AdversarialSample>> {
    let raw = attack_batch(xs, labels, model, cfg)?;
    match cfg.target_sir_db {
        None => Ok(raw),
        Some(sir) => xs
            .iter()
            .zip(raw)
            .map(|(x, a)| scale_to_sir(x, &a.x_adv, sir))
            .collect(),
    }
}

/// `true` when any source's error exceeds `zeta` (sources paired in sorted
/// order). Errors equal to `zeta` still count as correct.
pub fn attack_success(pred_deg: &[f64], true_deg: &[f64], zeta: f64) -> Result<bool> {
    if pred_deg.len() != true_deg.len() {
        return Err(domain("predicted and true angle counts differ"));
    }
    let mut p = pred_deg.to_vec();
    let mut t = true_deg.to_vec();
    p.sort_by(f64::total_cmp);
    t.sort_by(f64::total_cmp);
    Ok(p.iter().zip(&t).any(|(a, b)| (a - b).abs() > zeta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Loss = sum(w * x); gradient w everywhere.
    struct Linear(Vec<f64>);

    impl AttackTarget for Linear {
        type Label = ();
        fn loss_and_gradient(
            &self,
            inputs: &[&[f64]],
            _: &[()],
        ) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
            let losses = inputs
                .iter()
                .map(|x| x.iter().zip(&self.0).map(|(a, w)| a * w).sum())
                .collect();
            Ok((losses, inputs.iter().map(|_| self.0.clone()).collect()))
        }
    }

    /// Gradient cos(x): sign flips with position, which exercises momentum.
    struct Wavy;

    impl AttackTarget for Wavy {
        type Label = ();
        fn loss_and_gradient(
            &self,
            inputs: &[&[f64]],
            _: &[()],
        ) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
            let losses = inputs
                .iter()
                .map(|x| x.iter().map(|v| v.sin()).sum())
                .collect();
            let grads = inputs
                .iter()
                .map(|x| x.iter().map(|v| v.cos()).collect())
                .collect();
            Ok((losses, grads))
        }
    }

    struct Broken;

    impl AttackTarget for Broken {
        type Label = ();
        fn loss_and_gradient(
            &self,
            inputs: &[&[f64]],
            _: &[()],
        ) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
            Ok((
                vec![0.0; inputs.len()],
                inputs.iter().map(|x| vec![f64::NAN; x.len()]).collect(),
            ))
        }
    }

    fn cfg(method: AttackMethod, steps: usize, step_size: f64) -> AttackConfig {
        AttackConfig {
            method,
            steps,
            step_size,
            eps: 0.2,
            momentum_decay: 1.0,
            target_sir_db: None,
        }
    }

    #[test]
    fn defaults() {
        let t = AttackConfig::training();
        assert_eq!(
            (t.steps, t.step_size, t.eps, t.target_sir_db),
            (5, 0.02, 0.2, Some(10.0))
        );
        let e = AttackConfig::evaluation(AttackMethod::Mim);
        assert_eq!((e.steps, e.momentum_decay), (10, 1.0));
        assert_eq!("MIM".parse::<AttackMethod>().unwrap(), AttackMethod::Mim);
        assert!("fgsm".parse::<AttackMethod>().is_err());
    }

    #[test]
    fn zero_steps_is_identity() {
        let x = [0.3, -0.1];
        for method in [AttackMethod::Pgd, AttackMethod::Mim] {
            let a =
                attack_batch(&[&x], &[()], &Linear(vec![1.0, 1.0]), &cfg(method, 0, 0.02)).unwrap();
            assert_eq!(a[0].x_adv, x);
            assert_eq!(a[0].delta, [0.0, 0.0]);
            assert_eq!(a[0].achieved_sir_db, f64::INFINITY);
        }
    }

    #[test]
    fn pgd_toy_single_step() {
        let a = pgd(
            &[0.0],
            (),
            &Linear(vec![1.0]),
            &cfg(AttackMethod::Pgd, 1, 0.02),
        )
        .unwrap();
        assert_eq!(a.x_adv, [0.02]);
    }

    #[test]
    fn pgd_toy_clips_from_step_four() {
        let model = Linear(vec![1.0]);
        let expected = [0.05, 0.1, 0.15, 0.2, 0.2, 0.2, 0.2, 0.2, 0.2, 0.2];
        for (steps, want) in (1..=10).zip(expected) {
            let a = pgd(&[0.0], (), &model, &cfg(AttackMethod::Pgd, steps, 0.05)).unwrap();
            assert!(
                (a.x_adv[0] - want).abs() < 1e-15,
                "step {steps}: {}",
                a.x_adv[0]
            );
        }
    }

    #[test]
    fn mim_toy_momentum() {
        let a = mim(
            &[0.0],
            (),
            &Linear(vec![3.0]),
            &cfg(AttackMethod::Mim, 3, 0.02),
        )
        .unwrap();
        assert!((a.x_adv[0] - 0.06).abs() < 1e-15);
    }

    #[test]
    fn mim_without_momentum_matches_sign_ascent() {
        let x = [0.4, 1.4, 2.9, -1.0];
        let mut m = cfg(AttackMethod::Mim, 7, 0.07);
        m.momentum_decay = 0.0;
        m.eps = 0.3;
        let p = AttackConfig {
            method: AttackMethod::Pgd,
            ..m.clone()
        };
        let a = mim(&x, (), &Wavy, &m).unwrap();
        let b = pgd(&x, (), &Wavy, &p).unwrap();
        assert_eq!(a.x_adv, b.x_adv);
    }

    #[test]
    fn zero_gradient_mim_does_not_move() {
        let a = mim(
            &[0.5],
            (),
            &Linear(vec![0.0]),
            &cfg(AttackMethod::Mim, 4, 0.02),
        )
        .unwrap();
        assert_eq!(a.x_adv, [0.5]);
    }

    #[test]
    fn non_finite_gradient_is_an_attack_error() {
        let err = pgd(&[0.0], (), &Broken, &cfg(AttackMethod::Pgd, 1, 0.02)).unwrap_err();
        assert!(matches!(err, Error::Attack(_)));
    }

    #[test]
    fn sir_scaling_examples() {
        let s = scale_to_sir(&[1.0, -1.0], &[2.0, 0.0], 10.0).unwrap();
        assert!((s.delta[0] - 10f64.powf(-0.5)).abs() < 1e-15);
        assert!((s.achieved_sir_db - 10.0).abs() < 1e-12);

        let s = scale_to_sir(&[1.0, 1.0], &[2.0, 0.0], 0.0).unwrap();
        assert_eq!(s.x_adv, [2.0, 0.0]);

        let s = scale_to_sir(&[1.0, 1.0], &[1.0, 1.0], 10.0).unwrap();
        assert_eq!(s.x_adv, [1.0, 1.0]);
        assert_eq!(s.achieved_sir_db, f64::INFINITY);
        assert!(scale_to_sir(&[1.0], &[1.0, 2.0], 10.0).is_err());
    }

    #[test]
    fn success_indicator() {
        assert!(!attack_success(&[10.0], &[10.0], 2.0).unwrap());
        assert!(!attack_success(&[1.9, 12.0], &[0.0, 10.0], 2.0).unwrap());
        assert!(attack_success(&[0.0, 12.5], &[0.0, 10.0], 2.0).unwrap());
        assert!(!attack_success(&[12.0, 0.0], &[10.0, 1.0], 2.0).unwrap());
        assert!(attack_success(&[0.0], &[0.0, 1.0], 2.0).is_err());
    }

    proptest! {
        #[test]
        fn iterates_respect_eps(
            x in prop::collection::vec(-2.0f64..2.0, 1..20),
            steps in 0usize..12,
            psi in 0.001f64..0.3,
            eps in 0.01f64..0.5,
            mim_method in any::<bool>(),
        ) {
            let c = AttackConfig {
                method: if mim_method { AttackMethod::Mim } else { AttackMethod::Pgd },
                steps, step_size: psi, eps, momentum_decay: 1.0, target_sir_db: None,
            };
            let a = attack_batch(&[&x], &[()], &Wavy, &c).unwrap();
            prop_assert!(a[0].linf() <= eps + 1e-12);
        }

        #[test]
        fn sir_scaling_is_exact_and_parallel(
            pairs in prop::collection::vec((-2.0f64..2.0, -1.0f64..1.0), 2..40),
            sir in -10.0f64..30.0,
        ) {
            let x: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let adv: Vec<f64> = pairs.iter().map(|p| p.0 + p.1).collect();
            prop_assume!(power(&x) > 1e-6 && pairs.iter().any(|p| p.1.abs() > 1e-3));
            let s = scale_to_sir(&x, &adv, sir).unwrap();
            prop_assert!((s.achieved_sir_db - sir).abs() < 1e-6);
            let k = s.delta.iter().zip(&pairs).find(|(_, p)| p.1 != 0.0).map(|(d, p)| d / p.1).unwrap();
            prop_assert!(k > 0.0);
            for (d, p) in s.delta.iter().zip(&pairs) {
                prop_assert!((d - k * p.1).abs() < 1e-9);
            }
        }
    }
}
