//! Toy training loop: alternating mapper / critic Adam updates with a
//! constant-then-linear learning-rate schedule.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use super::{AdversarialForm, CycleModel, LossBreakdown, ObjectiveError, DEFAULT_LAMBDA};
use crate::rng::{Stream, Tag};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub lambda: f64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub total_steps: u64,
    /// Last step (1-based) trained at the full learning rate.
    pub decay_start: u64,
    pub batch_size: usize,
    /// Patch side; patches are `P x P x 3`.
    pub patch_size: usize,
    pub hidden: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lambda: DEFAULT_LAMBDA,
            learning_rate: 2e-4,
            beta1: 0.5,
            beta2: 0.999,
            epsilon: 1e-8,
            total_steps: 2000,
            decay_start: 1000,
            batch_size: 32,
            patch_size: 16,
            hidden: 16,
            seed: 7,
        }
    }
}

impl TrainConfig {
    pub fn patch_len(&self) -> usize {
        self.patch_size * self.patch_size * 3
    }

    /// Zero total steps is allowed; `decay_start` is clamped to `total_steps`
    /// in that case only.
    pub fn validate(&self) -> Result<(), ObjectiveError> {
        let bad = |m: &str| Err(ObjectiveError::InvalidConfig(m.to_string()));
        if !(self.lambda >= 0.0) {
            return Err(ObjectiveError::NegativeLambda(self.lambda));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be finite and >= 0");
        }
        if !((0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2)) {
            return bad("beta1 and beta2 must lie in [0, 1)");
        }
        if !(self.epsilon > 0.0) {
            return bad("epsilon must be > 0");
        }
        if self.decay_start > self.total_steps && self.total_steps > 0 {
            return bad("decay_start must be <= total_steps");
        }
        if self.batch_size == 0 || self.patch_size == 0 || self.hidden == 0 {
            return bad("batch_size, patch_size and hidden must be >= 1");
        }
        Ok(())
    }
}

/// Learning rate used at 1-based `step`.
pub fn learning_rate_at(cfg: &TrainConfig, step: u64) -> f64 {
    if step <= cfg.decay_start || cfg.total_steps <= cfg.decay_start {
        return cfg.learning_rate;
    }
    let frac = (step - cfg.decay_start) as f64 / (cfg.total_steps - cfg.decay_start) as f64;
    cfg.learning_rate * (1.0 - frac).max(0.0)
}

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(n: usize, beta1: f64, beta2: f64, epsilon: f64) -> Self {
        Self {
            beta1,
            beta2,
            epsilon,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            if lr != 0.0 {
                params[i] -= lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + self.epsilon);
            }
        }
    }
}

/// Source of toy patches.
pub trait PatchSampler {
    /// `batch` patches of side `patch`, flattened `P x P x 3`, values in `[-1, 1]`.
    fn sample(&self, patch: usize, batch: usize, rng: &mut Stream) -> Vec<f64>;
}

/// Solid patches of one gray level drawn from `U[-0.8, 0.8]`.
#[derive(Debug, Clone, Copy, Default)]
pub struct GrayPatches;

impl PatchSampler for GrayPatches {
    fn sample(&self, patch: usize, batch: usize, rng: &mut Stream) -> Vec<f64> {
        let n = patch * patch * 3;
        let mut out = Vec::with_capacity(n * batch);
        for _ in 0..batch {
            let g = rng.uniform(-0.8, 0.8);
            out.extend(std::iter::repeat_n(g, n));
        }
        out
    }
}

/// Two-level gray stripes, period 4 px, horizontal or vertical, random phase.
#[derive(Debug, Clone, Copy, Default)]
pub struct StripedPatches;

impl PatchSampler for StripedPatches {
    fn sample(&self, patch: usize, batch: usize, rng: &mut Stream) -> Vec<f64> {
        let mut out = Vec::with_capacity(patch * patch * 3 * batch);
        for _ in 0..batch {
            let vertical = rng.below(2) == 1;
            let phase = rng.below(4) as usize;
            let lo = rng.uniform(-0.8, -0.3);
            let hi = rng.uniform(0.3, 0.8);
            for y in 0..patch {
                for x in 0..patch {
                    let c = if vertical { x } else { y };
                    let v = if (c + phase) % 4 < 2 { hi } else { lo };
                    out.extend([v; 3]);
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub step: u64,
    pub lr: f64,
    pub losses: LossBreakdown,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub trace: Vec<TraceRow>,
    pub model: CycleModel,
}

impl TrainOutcome {
    /// Mean cycle loss of the last `n` rows over the mean of the first `n`.
    pub fn cycle_ratio(&self, n: usize) -> Option<f64> {
        let n = n.min(self.trace.len());
        if n == 0 {
            return None;
        }
        let mean = |rows: &[TraceRow]| rows.iter().map(|r| r.losses.cyc).sum::<f64>() / rows.len() as f64;
        let first = mean(&self.trace[..n]);
        let last = mean(&self.trace[self.trace.len() - n..]);
        Some(last / first)
    }
}

/// Trains both mappers and both critics. Each step samples a fresh batch
/// per domain, updates the mappers on the full objective, then updates the
/// critics against the fakes produced in that step.
pub fn toy_train(
    cfg: &TrainConfig,
    source: &dyn PatchSampler,
    target: &dyn PatchSampler,
) -> Result<TrainOutcome, ObjectiveError> {
    cfg.validate()?;
    let mut model = CycleModel::init(cfg.patch_len(), cfg.hidden, cfg.seed);
    let n_map = model.mapper_param_count();
    let n_all = model.sizes().iter().sum::<usize>();
    let mut adam_g = Adam::new(n_map, cfg.beta1, cfg.beta2, cfg.epsilon);
    let mut adam_d = Adam::new(n_all - n_map, cfg.beta1, cfg.beta2, cfg.epsilon);
    let mut params = model.params();
    let mut trace = Vec::with_capacity(cfg.total_steps as usize);

    for step in 1..=cfg.total_steps {
        let lr = learning_rate_at(cfg, step);
        let s = source.sample(
            cfg.patch_size,
            cfg.batch_size,
            &mut Stream::new(cfg.seed, step, Tag::Batch, 0),
        );
        let r = target.sample(
            cfg.patch_size,
            cfg.batch_size,
            &mut Stream::new(cfg.seed, step, Tag::Batch, 1),
        );

        let pass = model.mapper_objective(&s, &r, cfg.lambda, AdversarialForm::LeastSquares)?;
        let l = pass.losses;
        if ![l.adv_s2r, l.adv_r2s, l.cyc, l.total].iter().all(|v| v.is_finite()) {
            return Err(ObjectiveError::Divergence { step });
        }
        adam_g.step(&mut params[..n_map], &pass.grad[..n_map], lr);
        model.set_params(&params);

        let (d_loss, d_grad) =
            model.critic_objective(&s, &r, &pass.fake_s, &pass.fake_r, AdversarialForm::LeastSquares)?;
        if !d_loss.is_finite() {
            return Err(ObjectiveError::Divergence { step });
        }
        adam_d.step(&mut params[n_map..], &d_grad, lr);
        model.set_params(&params);
        if !model.all_finite() {
            return Err(ObjectiveError::Divergence { step });
        }
        trace.push(TraceRow { step, lr, losses: l });
    }
    Ok(TrainOutcome { trace, model })
}

/// CSV with header `step,lr,adv_s2r,adv_r2s,cyc,total`.
pub fn write_trace_csv<W: Write>(rows: &[TraceRow], mut w: W) -> io::Result<()> {
    writeln!(w, "step,lr,adv_s2r,adv_r2s,cyc,total")?;
    for r in rows {
        let l = &r.losses;
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.step, r.lr, l.adv_s2r, l.adv_r2s, l.cyc, l.total
        )?;
    }
    Ok(())
}
