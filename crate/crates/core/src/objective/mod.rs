//! Unpaired translation objective at desk scale.
//!
//! Two mappers (`S -> R`, `R -> S`) and two critics (`D_S`, `D_R`), trained
//! with least-squares adversarial losses and an L1 cycle-consistency loss:
//!
//! ```text
//! total = adv_s2r + adv_r2s + lambda * cyc
//! ```
//!
//! The L1 terms use a per-element mean. Log-form adversarial losses are
//! available for parity with the classic formulation.

mod gradcheck;
mod nets;
mod train;

pub use gradcheck::{grad_check, GradCheck};
pub use nets::{CriticNet, Gradients, MapperNet, OutputActivation, Tape, TwoLayerNet};
pub use train::{
    learning_rate_at, toy_train, write_trace_csv, Adam, GrayPatches, PatchSampler, StripedPatches, TraceRow,
    TrainConfig, TrainOutcome,
};

use serde::Serialize;

use crate::rng::{Stream, Tag};

/// Cycle weight used throughout.
pub const DEFAULT_LAMBDA: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ObjectiveError {
    #[error("empty batch")]
    EmptyBatch,
    #[error("shape mismatch: expected a multiple of/len {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("lambda must be >= 0, got {0}")]
    NegativeLambda(f64),
    #[error("non-finite loss")]
    NonFinite,
    #[error("epsilon must be > 0")]
    BadEpsilon,
    #[error("diverged at step {step}: non-finite loss")]
    Divergence { step: u64 },
    #[error("invalid train config: {0}")]
    InvalidConfig(String),
    #[error("patch values must lie in [-1, 1]")]
    OutOfRange,
}

/// Which domain a batch of patches comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Domain {
    Synthetic,
    Real,
}

/// A batch of flattened `P x P x 3` patches with values in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchBatch {
    pub domain: Domain,
    pub patch_len: usize,
    pub data: Vec<f64>,
}

impl PatchBatch {
    pub fn new(domain: Domain, patch_len: usize, data: Vec<f64>) -> Result<Self, ObjectiveError> {
        if patch_len == 0 || data.is_empty() {
            return Err(ObjectiveError::EmptyBatch);
        }
        if !data.len().is_multiple_of(patch_len) {
            return Err(ObjectiveError::ShapeMismatch {
                expected: patch_len,
                got: data.len(),
            });
        }
        if data.iter().any(|v| !(-1.0..=1.0).contains(v)) {
            return Err(ObjectiveError::OutOfRange);
        }
        Ok(Self {
            domain,
            patch_len,
            data,
        })
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.patch_len
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossBreakdown {
    pub adv_s2r: f64,
    pub adv_r2s: f64,
    pub cyc: f64,
    pub total: f64,
    pub lambda: f64,
}

fn mean(v: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = v.len() as f64;
    v.sum::<f64>() / n
}

/// `mean((d_real - 1)^2) + mean(d_fake^2)`.
pub fn critic_loss_ls(d_real: &[f64], d_fake: &[f64]) -> Result<f64, ObjectiveError> {
    if d_real.is_empty() || d_fake.is_empty() {
        return Err(ObjectiveError::EmptyBatch);
    }
    Ok(mean(d_real.iter().map(|d| (d - 1.0) * (d - 1.0))) + mean(d_fake.iter().map(|d| d * d)))
}

/// Gradients of [`critic_loss_ls`] with respect to `d_real` and `d_fake`.
pub fn critic_loss_ls_grad(d_real: &[f64], d_fake: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let (nr, nf) = (d_real.len() as f64, d_fake.len() as f64);
    (
        d_real.iter().map(|d| 2.0 * (d - 1.0) / nr).collect(),
        d_fake.iter().map(|d| 2.0 * d / nf).collect(),
    )
}

/// Mapper-side least-squares adversarial loss: `mean((d_fake - 1)^2)`.
pub fn mapper_adv_loss_ls(d_fake: &[f64]) -> Result<f64, ObjectiveError> {
    if d_fake.is_empty() {
        return Err(ObjectiveError::EmptyBatch);
    }
    Ok(mean(d_fake.iter().map(|d| (d - 1.0) * (d - 1.0))))
}

pub fn mapper_adv_loss_ls_grad(d_fake: &[f64]) -> Vec<f64> {
    let n = d_fake.len() as f64;
    d_fake.iter().map(|d| 2.0 * (d - 1.0) / n).collect()
}

/// `ln(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Log-form critic loss on logits: `-mean(log D(real)) - mean(log(1 - D(fake)))`
/// with `D = sigmoid`.
pub fn critic_loss_log(real_logits: &[f64], fake_logits: &[f64]) -> Result<f64, ObjectiveError> {
    if real_logits.is_empty() || fake_logits.is_empty() {
        return Err(ObjectiveError::EmptyBatch);
    }
    Ok(mean(real_logits.iter().map(|&a| softplus(-a))) + mean(fake_logits.iter().map(|&b| softplus(b))))
}

pub fn critic_loss_log_grad(real_logits: &[f64], fake_logits: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let (nr, nf) = (real_logits.len() as f64, fake_logits.len() as f64);
    (
        real_logits.iter().map(|&a| -sigmoid(-a) / nr).collect(),
        fake_logits.iter().map(|&b| sigmoid(b) / nf).collect(),
    )
}

/// Log-form mapper loss as written in the minimax objective: `mean(log(1 - D(fake)))`.
pub fn mapper_adv_loss_log(fake_logits: &[f64]) -> Result<f64, ObjectiveError> {
    if fake_logits.is_empty() {
        return Err(ObjectiveError::EmptyBatch);
    }
    Ok(mean(fake_logits.iter().map(|&b| -softplus(b))))
}

pub fn mapper_adv_loss_log_grad(fake_logits: &[f64]) -> Vec<f64> {
    let n = fake_logits.len() as f64;
    fake_logits.iter().map(|&b| -sigmoid(b) / n).collect()
}

fn mean_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    mean(a.iter().zip(b).map(|(x, y)| (x - y).abs()))
}

/// `mean|s_rec - s| + mean|r_rec - r|`.
pub fn cycle_loss(s: &[f64], s_rec: &[f64], r: &[f64], r_rec: &[f64]) -> Result<f64, ObjectiveError> {
    for (a, b) in [(s, s_rec), (r, r_rec)] {
        if a.len() != b.len() {
            return Err(ObjectiveError::ShapeMismatch {
                expected: a.len(),
                got: b.len(),
            });
        }
        if a.is_empty() {
            return Err(ObjectiveError::EmptyBatch);
        }
    }
    Ok(mean_abs_diff(s_rec, s) + mean_abs_diff(r_rec, r))
}

/// Gradients of [`cycle_loss`] with respect to `s_rec` and `r_rec`
/// (subgradient 0 where the difference is exactly 0).
pub fn cycle_loss_grad(s: &[f64], s_rec: &[f64], r: &[f64], r_rec: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let sign = |d: f64| {
        if d > 0.0 {
            1.0
        } else if d < 0.0 {
            -1.0
        } else {
            0.0
        }
    };
    let g = |a: &[f64], rec: &[f64]| {
        let n = a.len() as f64;
        rec.iter().zip(a).map(|(x, y)| sign(x - y) / n).collect::<Vec<_>>()
    };
    (g(s, s_rec), g(r, r_rec))
}

/// Weighted total of the three terms.
pub fn full_objective(adv_s2r: f64, adv_r2s: f64, cyc: f64, lambda: f64) -> Result<LossBreakdown, ObjectiveError> {
    if !(lambda >= 0.0) {
        return Err(ObjectiveError::NegativeLambda(lambda));
    }
    Ok(LossBreakdown {
        adv_s2r,
        adv_r2s,
        cyc,
        total: adv_s2r + adv_r2s + lambda * cyc,
        lambda,
    })
}

/// Adversarial loss flavor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AdversarialForm {
    #[default]
    LeastSquares,
    Log,
}

/// The four networks of the translation model.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleModel {
    pub g_s2r: MapperNet,
    pub g_r2s: MapperNet,
    pub d_s: CriticNet,
    pub d_r: CriticNet,
}

/// Mapper-side forward results kept for the critic update.
#[derive(Debug, Clone)]
pub struct MapperPass {
    pub losses: LossBreakdown,
    /// Gradient over all parameters in [`CycleModel::params`] order.
    pub grad: Vec<f64>,
    pub fake_r: Vec<f64>,
    pub fake_s: Vec<f64>,
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    dst.iter_mut().zip(src).for_each(|(d, s)| *d += s);
}

impl CycleModel {
    pub fn init(patch_len: usize, hidden: usize, seed: u64) -> Self {
        let rng = |k| Stream::new(seed, 0, Tag::Init, k);
        Self {
            g_s2r: MapperNet::init(patch_len, hidden, &mut rng(0)),
            g_r2s: MapperNet::init(patch_len, hidden, &mut rng(1)),
            d_s: CriticNet::init(patch_len, hidden, &mut rng(2)),
            d_r: CriticNet::init(patch_len, hidden, &mut rng(3)),
        }
    }

    fn nets(&self) -> [&TwoLayerNet; 4] {
        [&self.g_s2r.0, &self.g_r2s.0, &self.d_s.0, &self.d_r.0]
    }

    fn nets_mut(&mut self) -> [&mut TwoLayerNet; 4] {
        [&mut self.g_s2r.0, &mut self.g_r2s.0, &mut self.d_s.0, &mut self.d_r.0]
    }

    /// Parameter counts of `[g_s2r, g_r2s, d_s, d_r]`.
    pub fn sizes(&self) -> [usize; 4] {
        self.nets().map(|n| n.params.len())
    }

    /// Number of mapper parameters; they come first in [`Self::params`].
    pub fn mapper_param_count(&self) -> usize {
        let s = self.sizes();
        s[0] + s[1]
    }

    /// All parameters concatenated as `g_s2r | g_r2s | d_s | d_r`.
    pub fn params(&self) -> Vec<f64> {
        self.nets().iter().flat_map(|n| n.params.iter().copied()).collect()
    }

    pub fn set_params(&mut self, flat: &[f64]) {
        let mut off = 0;
        for net in self.nets_mut() {
            let n = net.params.len();
            net.params.copy_from_slice(&flat[off..off + n]);
            off += n;
        }
    }

    pub fn all_finite(&self) -> bool {
        self.nets().iter().all(|n| n.all_finite())
    }

    /// Full objective seen by the mappers, with its gradient over every parameter.
    pub fn mapper_objective(
        &self,
        s: &[f64],
        r: &[f64],
        lambda: f64,
        form: AdversarialForm,
    ) -> Result<MapperPass, ObjectiveError> {
        let t_fake_r = self.g_s2r.0.forward(s)?;
        let t_rec_s = self.g_r2s.0.forward(t_fake_r.output())?;
        let t_fake_s = self.g_r2s.0.forward(r)?;
        let t_rec_r = self.g_s2r.0.forward(t_fake_s.output())?;
        let t_dr = self.d_r.0.forward(t_fake_r.output())?;
        let t_ds = self.d_s.0.forward(t_fake_s.output())?;

        let (adv_s2r, adv_r2s, g_dr, g_ds) = match form {
            AdversarialForm::LeastSquares => (
                mapper_adv_loss_ls(t_dr.output())?,
                mapper_adv_loss_ls(t_ds.output())?,
                mapper_adv_loss_ls_grad(t_dr.output()),
                mapper_adv_loss_ls_grad(t_ds.output()),
            ),
            AdversarialForm::Log => (
                mapper_adv_loss_log(t_dr.output())?,
                mapper_adv_loss_log(t_ds.output())?,
                mapper_adv_loss_log_grad(t_dr.output()),
                mapper_adv_loss_log_grad(t_ds.output()),
            ),
        };
        let cyc = cycle_loss(s, t_rec_s.output(), r, t_rec_r.output())?;
        let losses = full_objective(adv_s2r, adv_r2s, cyc, lambda)?;

        let (mut g_rec_s, mut g_rec_r) = cycle_loss_grad(s, t_rec_s.output(), r, t_rec_r.output());
        g_rec_s.iter_mut().for_each(|v| *v *= lambda);
        g_rec_r.iter_mut().for_each(|v| *v *= lambda);

        let b_dr = self.d_r.0.backward(&t_dr, &g_dr)?;
        let b_ds = self.d_s.0.backward(&t_ds, &g_ds)?;
        let b_rec_s = self.g_r2s.0.backward(&t_rec_s, &g_rec_s)?;
        let b_rec_r = self.g_s2r.0.backward(&t_rec_r, &g_rec_r)?;

        let mut g_fake_r = b_dr.input;
        add_into(&mut g_fake_r, &b_rec_s.input);
        let mut g_fake_s = b_ds.input;
        add_into(&mut g_fake_s, &b_rec_r.input);
        let b_fake_r = self.g_s2r.0.backward(&t_fake_r, &g_fake_r)?;
        let b_fake_s = self.g_r2s.0.backward(&t_fake_s, &g_fake_s)?;

        let mut g_s2r = b_fake_r.params;
        add_into(&mut g_s2r, &b_rec_r.params);
        let mut g_r2s = b_fake_s.params;
        add_into(&mut g_r2s, &b_rec_s.params);

        let mut grad = g_s2r;
        grad.extend(g_r2s);
        grad.extend(b_ds.params);
        grad.extend(b_dr.params);
        Ok(MapperPass {
            losses,
            grad,
            fake_r: t_fake_r.output().to_vec(),
            fake_s: t_fake_s.output().to_vec(),
        })
    }

    /// Sum of both critics' losses on real patches vs the given fakes, with the
    /// gradient over the critic parameters (`d_s | d_r`).
    pub fn critic_objective(
        &self,
        s: &[f64],
        r: &[f64],
        fake_s: &[f64],
        fake_r: &[f64],
        form: AdversarialForm,
    ) -> Result<(f64, Vec<f64>), ObjectiveError> {
        let mut total = 0.0;
        let mut grad = Vec::new();
        for (critic, real, fake) in [(&self.d_s.0, s, fake_s), (&self.d_r.0, r, fake_r)] {
            let t_real = critic.forward(real)?;
            let t_fake = critic.forward(fake)?;
            let (loss, (g_real, g_fake)) = match form {
                AdversarialForm::LeastSquares => (
                    critic_loss_ls(t_real.output(), t_fake.output())?,
                    critic_loss_ls_grad(t_real.output(), t_fake.output()),
                ),
                AdversarialForm::Log => (
                    critic_loss_log(t_real.output(), t_fake.output())?,
                    critic_loss_log_grad(t_real.output(), t_fake.output()),
                ),
            };
            total += loss;
            let mut g = critic.backward(&t_real, &g_real)?.params;
            add_into(&mut g, &critic.backward(&t_fake, &g_fake)?.params);
            grad.extend(g);
        }
        Ok((total, grad))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn critic_loss_examples() {
        assert_eq!(critic_loss_ls(&[1.0, 1.0], &[0.0, 0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(critic_loss_ls(&[0.5; 4], &[0.5; 4]).unwrap(), 0.5);
        assert_eq!(
            critic_loss_ls(&[0.5; 3], &[0.5; 5]).unwrap(),
            critic_loss_ls(&[0.5; 5], &[0.5; 3]).unwrap()
        );
        assert_eq!(critic_loss_ls(&[], &[0.0]), Err(ObjectiveError::EmptyBatch));
    }

    #[test]
    fn mapper_loss_examples() {
        assert_eq!(mapper_adv_loss_ls(&[1.0; 3]).unwrap(), 0.0);
        assert_eq!(mapper_adv_loss_ls(&[0.0; 3]).unwrap(), 1.0);
        assert_eq!(mapper_adv_loss_ls(&[0.0, 1.0]).unwrap(), 0.5);
        assert_eq!(mapper_adv_loss_ls(&[]), Err(ObjectiveError::EmptyBatch));
    }

    #[test]
    fn cycle_loss_examples() {
        let s = [0.1, -0.4, 0.7, 0.0];
        let r = [0.3, 0.2, -0.9];
        assert_eq!(cycle_loss(&s, &s, &r, &r).unwrap(), 0.0);
        let shifted: Vec<f64> = s.iter().map(|v| v + 0.1).collect();
        assert!((cycle_loss(&s, &shifted, &r, &r).unwrap() - 0.1).abs() < 1e-15);
        let neg = |v: &[f64]| v.iter().map(|x| -x).collect::<Vec<_>>();
        let r_rec = [0.0, 0.5, -0.2];
        let a = cycle_loss(&s, &shifted, &r, &r_rec).unwrap();
        let b = cycle_loss(&neg(&s), &neg(&shifted), &neg(&r), &neg(&r_rec)).unwrap();
        assert_eq!(a, b);
        assert!(matches!(
            cycle_loss(&s, &s[..3], &r, &r),
            Err(ObjectiveError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn full_objective_examples() {
        assert_eq!(full_objective(0.0, 0.0, 0.0, DEFAULT_LAMBDA).unwrap().total, 0.0);
        assert_eq!(DEFAULT_LAMBDA, 10.0);
        let l = full_objective(0.3, 0.4, 0.2, 10.0).unwrap();
        assert!((l.total - 2.7).abs() < 1e-12);
        assert_eq!(
            full_objective(0.0, 0.0, 1.0, -1.0),
            Err(ObjectiveError::NegativeLambda(-1.0))
        );
    }

    #[test]
    fn log_losses_are_stable_at_extremes() {
        assert!(critic_loss_log(&[800.0], &[-800.0]).unwrap() < 1e-300);
        assert!((critic_loss_log(&[-800.0], &[800.0]).unwrap() - 1600.0).abs() < 1e-9);
        assert!((mapper_adv_loss_log(&[0.0]).unwrap() + std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn patch_batch_invariants() {
        assert!(PatchBatch::new(Domain::Real, 3, vec![0.0; 6]).is_ok());
        assert_eq!(PatchBatch::new(Domain::Real, 3, vec![0.0; 6]).unwrap().len(), 2);
        assert_eq!(
            PatchBatch::new(Domain::Real, 3, vec![0.0; 5]).unwrap_err(),
            ObjectiveError::ShapeMismatch { expected: 3, got: 5 }
        );
        assert_eq!(
            PatchBatch::new(Domain::Real, 3, vec![1.5; 3]).unwrap_err(),
            ObjectiveError::OutOfRange
        );
        assert_eq!(
            PatchBatch::new(Domain::Synthetic, 3, vec![]).unwrap_err(),
            ObjectiveError::EmptyBatch
        );
    }

    #[test]
    fn params_round_trip() {
        let mut m = CycleModel::init(12, 4, 9);
        let p = m.params();
        assert_eq!(p.len(), m.sizes().iter().sum::<usize>());
        let doubled: Vec<f64> = p.iter().map(|v| v * 2.0).collect();
        m.set_params(&doubled);
        assert_eq!(m.params(), doubled);
    }
}
