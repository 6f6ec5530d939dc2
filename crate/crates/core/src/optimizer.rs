//! Full-batch gradient descent and online SGD on the surrogate risk.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, LabError, Result};
use crate::loss::{Inverse, SurrogateLoss};
use crate::metrics::{signed, surrogate_risk};
use crate::rng::derive_seed;
use crate::scalar::{dist, dot, norm, CompensatedSum, Scalar};
use crate::synthdata::{sample, Dataset, DistributionSpec};

/// Norm beyond which a run is declared divergent.
pub const DIVERGENCE_NORM: f64 = 1e9;

/// Validation-set cap for best-iterate selection in SGD.
pub const MAX_VALIDATION: usize = 100_000;

/// Seed tag separating the SGD validation set from the training stream.
const VALIDATION_TAG: u64 = 0x0076_616c_6964; // "valid"

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    FullBatch,
    OnlineSgd,
}

/// Which analysis a default step size comes from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepRule<T> {
    /// `(2/5) / (H B^2)` for smooth losses.
    FullBatch,
    /// `eps / (L^2 B^2)` subgradient rule for non-smooth losses.
    FullBatchNonSmooth { eps: T },
    /// `eps / (4 L^2 B^2)`.
    SgdUnbounded { eps: T },
    /// `1 / (32 H B^2)`.
    SgdFastRate,
}

pub fn default_step_size<T: Scalar, L: SurrogateLoss<T> + ?Sized>(loss: &L, b_x: T, rule: StepRule<T>) -> Result<T> {
    if !(b_x > T::zero()) {
        return invalid(format!("B_X must be positive, got {b_x}"));
    }
    let b2 = b_x * b_x;
    let lip = loss.lipschitz();
    let check_eps = |eps: T| {
        if eps > T::zero() && eps.is_finite() {
            Ok(eps)
        } else {
            invalid(format!("epsilon must be positive, got {eps}"))
        }
    };
    match rule {
        StepRule::FullBatch => {
            let h = loss.smoothness().ok_or(LabError::NonSmooth("the full-batch step rule"))?;
            Ok(T::lit(0.4) / (h * b2))
        }
        StepRule::FullBatchNonSmooth { eps } => Ok(check_eps(eps)? / (lip * lip * b2)),
        StepRule::SgdUnbounded { eps } => Ok(check_eps(eps)? / (T::lit(4.0) * lip * lip * b2)),
        StepRule::SgdFastRate => {
            let h = loss.smoothness().ok_or(LabError::NonSmooth("the fast-rate SGD step rule"))?;
            Ok(T::one() / (T::lit(32.0) * h * b2))
        }
    }
}

/// Iteration count, possibly unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum IterationCount {
    Finite(u64),
    Infinite,
}

impl IterationCount {
    /// Rounds a real-valued count up; non-finite or overflowing counts are infinite.
    pub fn from_f64(t: f64) -> Self {
        if t.is_finite() && t < u64::MAX as f64 {
            IterationCount::Finite(t.ceil().max(1.0) as u64)
        } else {
            IterationCount::Infinite
        }
    }

    pub fn finite(self) -> Option<u64> {
        match self {
            IterationCount::Finite(t) => Some(t),
            IterationCount::Infinite => None,
        }
    }

    fn from_real(t: f64) -> Self {
        if t.is_finite() && t < u64::MAX as f64 {
            IterationCount::Finite(t.ceil().max(1.0) as u64)
        } else {
            IterationCount::Infinite
        }
    }
}

/// Iteration-count formulas.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IterationRule<T> {
    /// `(4/3) eta^-1 eps^-1 |w0 - v|^2`.
    GdGeneric { eta: T, eps: T, w0_to_v_sq: T },
    /// `(4/3) eta^-1 eps1^-1 gamma^-2 [l^-1(eps2)]^2`.
    GdBounded { eta: T, eps1: T, gamma: T, inverse_eps2: Inverse<T> },
    /// `2 eta^-1 eps1^-1 gamma^-2 [l^-1(eps2)]^2`.
    SgdUnbounded { eta: T, eps1: T, gamma: T, inverse_eps2: Inverse<T> },
    /// `|w0 - v|^2 L^2 B^2 / eps^2` for the subgradient rule.
    NonSmooth { lipschitz: T, b_x: T, eps: T, w0_to_v_sq: T },
}

pub fn iterations_for<T: Scalar>(rule: IterationRule<T>) -> Result<IterationCount> {
    let pos = |name: &str, v: T| -> Result<f64> {
        let f = v.to_f64_lossy();
        if f > 0.0 && f.is_finite() {
            Ok(f)
        } else {
            invalid(format!("{name} must be positive, got {v}"))
        }
    };
    let t = match rule {
        IterationRule::GdGeneric { eta, eps, w0_to_v_sq } => {
            let sq = w0_to_v_sq.to_f64_lossy();
            if !(sq >= 0.0) {
                return invalid("squared distance must be non-negative");
            }
            4.0 / 3.0 / pos("eta", eta)? / pos("eps", eps)? * sq
        }
        IterationRule::GdBounded { eta, eps1, gamma, inverse_eps2 }
        | IterationRule::SgdUnbounded { eta, eps1, gamma, inverse_eps2 } => {
            let lead = if matches!(rule, IterationRule::GdBounded { .. }) { 4.0 / 3.0 } else { 2.0 };
            let Inverse::Finite(z) = inverse_eps2 else {
                return Ok(IterationCount::Infinite);
            };
            let g = pos("gamma", gamma)?;
            let z = z.to_f64_lossy();
            lead / pos("eta", eta)? / pos("eps1", eps1)? / (g * g) * z * z
        }
        IterationRule::NonSmooth { lipschitz, b_x, eps, w0_to_v_sq } => {
            let (l, b, e) = (pos("L", lipschitz)?, pos("B_X", b_x)?, pos("eps", eps)?);
            w0_to_v_sq.to_f64_lossy().max(0.0) * l * l * b * b / (e * e)
        }
    };
    Ok(IterationCount::from_real(t))
}

/// Size of the SGD validation set for target accuracy `eps`.
pub fn validation_size(eps: f64) -> usize {
    let k = (1.0 / (eps * eps)).ceil();
    ((10.0 * k) as usize).clamp(1, MAX_VALIDATION)
}

/// Iterations at which the trace records state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum CheckpointSchedule {
    /// `k` evenly spaced checkpoints, plus `t = 0`.
    Evenly(usize),
    /// Integer-rounded geometric grid with `per_doubling` points per factor 2.
    Geometric(usize),
    Explicit(Vec<u64>),
}

impl Default for CheckpointSchedule {
    fn default() -> Self {
        CheckpointSchedule::Evenly(100)
    }
}

impl CheckpointSchedule {
    /// Sorted checkpoint iterations in `[0, total]`, always containing both ends.
    pub fn points(&self, total: u64) -> Vec<u64> {
        let mut pts: Vec<u64> = match self {
            CheckpointSchedule::Evenly(k) => {
                let k = (*k).max(1) as u64;
                (0..=k).map(|i| ((i as u128 * total as u128) / k as u128) as u64).collect()
            }
            CheckpointSchedule::Geometric(per) => {
                let ratio = 2f64.powf(1.0 / (*per).max(1) as f64);
                let mut v = vec![0u64];
                let mut x = 1.0f64;
                while (x as u64) < total {
                    v.push(x.round() as u64);
                    x *= ratio;
                }
                v
            }
            CheckpointSchedule::Explicit(v) => v.iter().copied().filter(|&t| t <= total).collect(),
        };
        pts.push(0);
        pts.push(total);
        pts.sort_unstable();
        pts.dedup();
        pts
    }
}

/// Deliberate defects for negative-control tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fault {
    /// Step along the gradient instead of against it.
    FlipGradientSign,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimConfig<T> {
    pub mode: Mode,
    pub eta: T,
    pub iterations: u64,
    pub w0: Vec<T>,
    pub reference: Option<Vec<T>>,
    #[serde(default)]
    pub checkpoints: CheckpointSchedule,
    #[serde(default)]
    pub fault: Option<Fault>,
}

impl<T: Scalar> OptimConfig<T> {
    /// Starts from the origin in dimension `d`.
    pub fn new(mode: Mode, d: usize, eta: T, iterations: u64) -> Self {
        Self {
            mode,
            eta,
            iterations,
            w0: vec![T::zero(); d],
            reference: None,
            checkpoints: CheckpointSchedule::default(),
            fault: None,
        }
    }

    pub fn with_reference(mut self, v: Vec<T>) -> Self {
        self.reference = Some(v);
        self
    }

    pub fn with_w0(mut self, w0: Vec<T>) -> Self {
        self.w0 = w0;
        self
    }

    pub fn with_checkpoints(mut self, c: CheckpointSchedule) -> Self {
        self.checkpoints = c;
        self
    }

    pub fn with_fault(mut self, f: Fault) -> Self {
        self.fault = Some(f);
        self
    }

    fn validate(&self, d: usize, mode: Mode) -> Result<()> {
        if self.mode != mode {
            return invalid(format!("configuration is for {:?}, not {mode:?}", self.mode));
        }
        if !(self.eta >= T::zero() && self.eta.is_finite()) {
            return invalid(format!("step size must be non-negative, got {}", self.eta));
        }
        if self.iterations == 0 {
            return invalid("iteration count must be at least 1");
        }
        if self.w0.len() != d {
            return Err(LabError::DimensionMismatch { expected: d, got: self.w0.len() });
        }
        if let Some(v) = &self.reference {
            if v.len() != d {
                return Err(LabError::DimensionMismatch { expected: d, got: v.len() });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Checkpoint<T> {
    pub t: u64,
    /// Training risk (full batch) or validation risk (SGD).
    pub emp_risk: T,
    pub dist_to_ref: Option<T>,
    pub norm_w: T,
    /// Held-out risk, when a validation set is in use.
    pub val_risk: Option<T>,
}

/// Worst-case quantities tracked at every step of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepDiagnostics<T> {
    /// `max_t F(w_{t+1}) - F(w_t)` (full batch).
    pub max_risk_increase: T,
    /// `max_t |w_t - v|`.
    pub max_dist_to_ref: Option<T>,
    pub initial_dist_to_ref: Option<T>,
    pub steps: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainTrace<T> {
    pub checkpoints: Vec<Checkpoint<T>>,
    pub final_w: Vec<T>,
    pub best_w: Vec<T>,
    pub best_t: u64,
    /// Mean of `F(w_t)` over `t < T` (full batch) or of the online losses (SGD).
    pub running_mean_risk: T,
    pub diagnostics: StepDiagnostics<T>,
    /// Set when an observer stopped the run early.
    pub stopped_at: Option<u64>,
}

/// Whether a run keeps going after a checkpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

/// Checkpoint callback.
pub trait Observer<T> {
    fn on_checkpoint(&mut self, checkpoint: &Checkpoint<T>, w: &[T]) -> Control;
}

/// Observer that never stops a run.
pub struct NoObserver;

impl<T> Observer<T> for NoObserver {
    fn on_checkpoint(&mut self, _: &Checkpoint<T>, _: &[T]) -> Control {
        Control::Continue
    }
}

impl<T, F: FnMut(&Checkpoint<T>, &[T]) -> Control> Observer<T> for F {
    fn on_checkpoint(&mut self, checkpoint: &Checkpoint<T>, w: &[T]) -> Control {
        self(checkpoint, w)
    }
}

/// One pass over the data: returns `F(w)` and writes `grad F(w)` into `grad`.
pub fn risk_and_gradient<T: Scalar, L: SurrogateLoss<T> + ?Sized>(
    w: &[T],
    ds: &Dataset<T>,
    loss: &L,
    grad: &mut [T],
) -> T {
    grad.iter_mut().for_each(|g| *g = T::zero());
    let mut risk = CompensatedSum::default();
    for (x, y) in ds.rows() {
        let (l, dl) = loss.value_and_derivative(signed(dot(w, x), y));
        risk.add(l);
        let c = signed(dl, y);
        if c != T::zero() {
            for (g, xi) in grad.iter_mut().zip(x) {
                *g = c * *xi + *g;
            }
        }
    }
    let n = T::from_count(ds.len());
    grad.iter_mut().for_each(|g| *g = *g / n);
    risk.total() / n
}

fn diverged<T: Scalar>(iteration: u64, w: &[T], risk: T) -> Option<LabError> {
    if !risk.is_finite() {
        return Some(LabError::Diverged { iteration: iteration as usize, reason: format!("risk became {risk}") });
    }
    let nw = norm(w);
    if !(nw.to_f64_lossy() <= DIVERGENCE_NORM) {
        return Some(LabError::Diverged {
            iteration: iteration as usize,
            reason: format!("|w| = {nw} exceeds {DIVERGENCE_NORM:e}"),
        });
    }
    None
}

/// Full-batch gradient descent. The best iterate is the checkpoint with the
/// lowest training risk.
pub fn gd_train<T: Scalar, L: SurrogateLoss<T> + ?Sized>(
    ds: &Dataset<T>,
    loss: &L,
    cfg: &OptimConfig<T>,
) -> Result<TrainTrace<T>> {
    gd_run(ds, loss, cfg, None, &mut NoObserver)
}

/// Full-batch gradient descent selecting the best iterate on `val`.
pub fn gd_train_validated<T: Scalar, L: SurrogateLoss<T> + ?Sized>(
    ds: &Dataset<T>,
    val: &Dataset<T>,
    loss: &L,
    cfg: &OptimConfig<T>,
) -> Result<TrainTrace<T>> {
    gd_run(ds, loss, cfg, Some(val), &mut NoObserver)
}

/// Full-batch gradient descent with a checkpoint callback.
pub fn gd_train_observed<T: Scalar, L: SurrogateLoss<T> + ?Sized, O: Observer<T> + ?Sized>(
    ds: &Dataset<T>,
    loss: &L,
    cfg: &OptimConfig<T>,
    val: Option<&Dataset<T>>,
    observer: &mut O,
) -> Result<TrainTrace<T>> {
    gd_run(ds, loss, cfg, val, observer)
}

fn gd_run<T: Scalar, L: SurrogateLoss<T> + ?Sized, O: Observer<T> + ?Sized>(
    ds: &Dataset<T>,
    loss: &L,
    cfg: &OptimConfig<T>,
    val: Option<&Dataset<T>>,
    observer: &mut O,
) -> Result<TrainTrace<T>> {
    let d = ds.d();
    cfg.validate(d, Mode::FullBatch)?;
    if let Some(v) = val {
        if v.d() != d {
            return Err(LabError::DimensionMismatch { expected: d, got: v.d() });
        }
    }
    match loss.smoothness() {
        Some(h) => {
            let b = ds.max_norm();
            let limit = T::lit(0.4) / (h * b * b);
            if cfg.eta > limit * (T::one() + T::lit(1e-12)) {
                log::warn!("step size {} exceeds (2/5)/(H B^2) = {limit} for this dataset", cfg.eta);
            }
        }
        None => log::info!("non-smooth loss: running subgradient descent without a descent guarantee"),
    }
    let schedule = cfg.checkpoints.points(cfg.iterations);
    let mut next_cp = 0usize;
    let mut w = cfg.w0.clone();
    let mut grad = vec![T::zero(); d];
    let reference = cfg.reference.as_deref();
    let sign = match cfg.fault {
        Some(Fault::FlipGradientSign) => -T::one(),
        None => T::one(),
    };
    let initial_dist = reference.map(|v| dist(&w, v));
    let mut diag = StepDiagnostics {
        max_risk_increase: T::neg_infinity(),
        max_dist_to_ref: initial_dist,
        initial_dist_to_ref: initial_dist,
        steps: 0,
    };
    let mut checkpoints = Vec::with_capacity(schedule.len());
    let mut best: Option<(T, u64, Vec<T>)> = None;
    let mut sum_risk = T::zero();
    let mut prev_risk: Option<T> = None;
    let mut stopped_at = None;
    let mut t = 0u64;
    loop {
        let risk = risk_and_gradient(&w, ds, loss, &mut grad);
        if let Some(e) = diverged(t, &w, risk) {
            return Err(e);
        }
        if let Some(p) = prev_risk {
            diag.max_risk_increase = diag.max_risk_increase.max(risk - p);
        }
        prev_risk = Some(risk);
        if let (Some(v), Some(m)) = (reference, diag.max_dist_to_ref.as_mut()) {
            *m = m.max(dist(&w, v));
        }
        if schedule.get(next_cp) == Some(&t) {
            next_cp += 1;
            let val_risk = val.map(|v| surrogate_risk(&w, v, loss)).transpose()?;
            let cp = Checkpoint {
                t,
                emp_risk: risk,
                dist_to_ref: reference.map(|v| dist(&w, v)),
                norm_w: norm(&w),
                val_risk,
            };
            let score = val_risk.unwrap_or(risk);
            if best.as_ref().is_none_or(|(b, _, _)| score < *b) {
                best = Some((score, t, w.clone()));
            }
            let control = observer.on_checkpoint(&cp, &w);
            checkpoints.push(cp);
            if control == Control::Stop && t < cfg.iterations {
                stopped_at = Some(t);
                break;
            }
        }
        if t == cfg.iterations {
            break;
        }
        sum_risk = sum_risk + risk;
        let step = sign * cfg.eta;
        for (wi, gi) in w.iter_mut().zip(&grad) {
            *wi = *wi - step * *gi;
        }
        t += 1;
        diag.steps = t;
    }
    let (_, best_t, best_w) = best.expect("t = 0 is always a checkpoint");
    let mean = if diag.steps > 0 { sum_risk / T::lit(diag.steps as f64) } else { prev_risk.unwrap_or(T::zero()) };
    Ok(TrainTrace { checkpoints, final_w: w, best_w, best_t, running_mean_risk: mean, diagnostics: diag, stopped_at })
}

/// Options specific to online SGD.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SgdOptions {
    /// Size of the independent validation set used to pick the best iterate.
    pub n_val: usize,
}

impl SgdOptions {
    pub fn for_accuracy(eps: f64) -> Self {
        Self { n_val: validation_size(eps) }
    }
}

/// Online SGD with one fresh sample per step drawn from `spec`.
///
/// The training stream is `spec.stream(seed)`; the validation set is drawn
/// from a seed derived from `seed`.
pub fn sgd_train<T: Scalar, L: SurrogateLoss<T> + ?Sized>(
    spec: &DistributionSpec<T>,
    loss: &L,
    cfg: &OptimConfig<T>,
    seed: u64,
    opts: SgdOptions,
) -> Result<TrainTrace<T>> {
    sgd_train_observed(spec, loss, cfg, seed, opts, &mut NoObserver)
}

pub fn sgd_train_observed<T: Scalar, L: SurrogateLoss<T> + ?Sized, O: Observer<T> + ?Sized>(
    spec: &DistributionSpec<T>,
    loss: &L,
    cfg: &OptimConfig<T>,
    seed: u64,
    opts: SgdOptions,
    observer: &mut O,
) -> Result<TrainTrace<T>> {
    let d = spec.d;
    cfg.validate(d, Mode::OnlineSgd)?;
    let mut stream = spec.stream(seed)?;
    let val = sample(spec, opts.n_val.max(1), derive_seed(seed, &[VALIDATION_TAG]))?;
    let schedule = cfg.checkpoints.points(cfg.iterations);
    let reference = cfg.reference.as_deref();
    let sign = match cfg.fault {
        Some(Fault::FlipGradientSign) => -T::one(),
        None => T::one(),
    };
    let mut w = cfg.w0.clone();
    let mut x = vec![T::zero(); d];
    let initial_dist = reference.map(|v| dist(&w, v));
    let mut diag = StepDiagnostics {
        max_risk_increase: T::neg_infinity(),
        max_dist_to_ref: initial_dist,
        initial_dist_to_ref: initial_dist,
        steps: 0,
    };
    let mut checkpoints = Vec::with_capacity(schedule.len());
    let mut best: Option<(T, u64, Vec<T>)> = None;
    let mut online_sum = 0.0f64;
    let mut stopped_at = None;
    let mut prev_val: Option<T> = None;
    let mut t = 0u64;
    for (k, &cp_t) in schedule.iter().enumerate() {
        // advance to the next checkpoint
        while t < cp_t {
            let y = stream.next_into(&mut x);
            let (l, dl) = loss.value_and_derivative(signed(dot(&w, &x), y));
            online_sum += l.to_f64_lossy();
            let c = sign * cfg.eta * signed(dl, y);
            if c != T::zero() {
                for (wi, xi) in w.iter_mut().zip(&x) {
                    *wi = *wi - c * *xi;
                }
            }
            t += 1;
        }
        diag.steps = t;
        let val_risk = surrogate_risk(&w, &val, loss).ok();
        let risk = val_risk.unwrap_or(T::infinity());
        if let Some(e) = diverged(t, &w, risk) {
            return Err(e);
        }
        if let Some(p) = prev_val {
            diag.max_risk_increase = diag.max_risk_increase.max(risk - p);
        }
        prev_val = Some(risk);
        let dref = reference.map(|v| dist(&w, v));
        if let (Some(m), Some(dv)) = (diag.max_dist_to_ref.as_mut(), dref) {
            *m = m.max(dv);
        }
        let cp = Checkpoint { t, emp_risk: risk, dist_to_ref: dref, norm_w: norm(&w), val_risk };
        if best.as_ref().is_none_or(|(b, _, _)| risk < *b) {
            best = Some((risk, t, w.clone()));
        }
        let control = observer.on_checkpoint(&cp, &w);
        checkpoints.push(cp);
        if control == Control::Stop && k + 1 < schedule.len() {
            stopped_at = Some(t);
            break;
        }
    }
    let (_, best_t, best_w) = best.expect("t = 0 is always a checkpoint");
    let mean = if t > 0 { T::lit(online_sum / t as f64) } else { loss.value_at_zero() };
    Ok(TrainTrace { checkpoints, final_w: w, best_w, best_t, running_mean_risk: mean, diagnostics: diag, stopped_at })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss::LossSpec;
    use crate::metrics::zero_one_error;
    use crate::synthdata::{DatasetMeta, NoiseModel};

    fn meta() -> DatasetMeta {
        DatasetMeta { seed: 0, spec_id: "manual".into(), flip_fraction: 0.0, max_norm: 0.0 }
    }

    #[test]
    fn default_step_sizes() {
        let l = LossSpec::<f64>::logistic();
        assert!((default_step_size(&l, 1.0, StepRule::FullBatch).unwrap() - 1.6).abs() < 1e-15);
        assert!((default_step_size(&l, 1.0, StepRule::SgdFastRate).unwrap() - 0.125).abs() < 1e-15);
        let e = default_step_size(&l, 2.0, StepRule::SgdUnbounded { eps: 0.1 }).unwrap();
        assert!((e - 0.00625).abs() < 1e-15);
        let h = LossSpec::<f64>::hinge();
        assert!(matches!(default_step_size(&h, 1.0, StepRule::FullBatch), Err(LabError::NonSmooth(_))));
        assert!((default_step_size(&h, 2.0, StepRule::FullBatchNonSmooth { eps: 0.1 }).unwrap() - 0.025).abs() < 1e-15);
    }

    #[test]
    fn iteration_formulas() {
        let t = iterations_for(IterationRule::GdGeneric { eta: 0.1f64, eps: 0.01, w0_to_v_sq: 4.0 }).unwrap();
        assert_eq!(t, IterationCount::Finite(5334));
        let z = 2.252_168_461_044_091f64;
        let t = iterations_for(IterationRule::GdBounded {
            eta: 1.6,
            eps1: 0.05,
            gamma: 0.2,
            inverse_eps2: Inverse::Finite(z),
        })
        .unwrap();
        // 4/3 * 0.625 * 20 * 25 * z^2 = 2113.37...
        assert_eq!(t, IterationCount::Finite(2114));
        let a = iterations_for(IterationRule::SgdUnbounded {
            eta: 0.01,
            eps1: 0.1,
            gamma: 0.5,
            inverse_eps2: Inverse::Finite(4.0),
        })
        .unwrap()
        .finite()
        .unwrap();
        let b = iterations_for(IterationRule::SgdUnbounded {
            eta: 0.02,
            eps1: 0.1,
            gamma: 0.5,
            inverse_eps2: Inverse::Finite(4.0),
        })
        .unwrap()
        .finite()
        .unwrap();
        assert_eq!(a, 2 * b);
        let inf = iterations_for(IterationRule::SgdUnbounded {
            eta: 0.02,
            eps1: 0.1,
            gamma: 0.5,
            inverse_eps2: Inverse::<f64>::Infinite,
        })
        .unwrap();
        assert_eq!(inf, IterationCount::Infinite);
    }

    #[test]
    fn checkpoint_schedules() {
        assert_eq!(CheckpointSchedule::Evenly(4).points(8), vec![0, 2, 4, 6, 8]);
        assert_eq!(CheckpointSchedule::Evenly(100).points(3), vec![0, 1, 2, 3]);
        let g = CheckpointSchedule::Geometric(1).points(20);
        assert_eq!(g, vec![0, 1, 2, 4, 8, 16, 20]);
        assert_eq!(validation_size(0.1), 1000);
        assert_eq!(validation_size(0.001), MAX_VALIDATION);
    }

    #[test]
    fn single_sample_single_step() {
        let ds = Dataset::new(2, vec![1.0, 0.0], vec![1], meta()).unwrap();
        let cfg = OptimConfig::new(Mode::FullBatch, 2, 1.0, 1);
        let tr = gd_train(&ds, &LossSpec::logistic(), &cfg).unwrap();
        assert_eq!(tr.final_w, vec![0.5, 0.0]);
    }

    #[test]
    fn one_step_matches_hand_rolled_update() {
        let spec = DistributionSpec::<f64>::gaussian(3).with_noise(NoiseModel::Rcn { eta: 0.2 });
        let ds = sample(&spec, 50, 4).unwrap();
        let loss = LossSpec::logistic();
        let w0 = vec![0.3, -0.1, 0.2];
        let cfg = OptimConfig::new(Mode::FullBatch, 3, 0.7, 1).with_w0(w0.clone());
        let tr = gd_train(&ds, &loss, &cfg).unwrap();
        let mut g = [0.0; 3];
        for (x, y) in ds.rows() {
            let m = y as f64 * (w0[0] * x[0] + w0[1] * x[1] + w0[2] * x[2]);
            let dl = -1.0 / (1.0 + m.exp());
            for k in 0..3 {
                g[k] += dl * y as f64 * x[k] / 50.0;
            }
        }
        for k in 0..3 {
            assert!((tr.final_w[k] - (w0[k] - 0.7 * g[k])).abs() < 1e-14);
        }
    }

    #[test]
    fn separable_data_reaches_zero_training_error() {
        let spec = DistributionSpec::<f64>::hard_margin_sphere(5, 0.2);
        let ds = sample(&spec, 500, 10).unwrap();
        let cfg = OptimConfig::new(Mode::FullBatch, 5, 1.6, 2000);
        let tr = gd_train(&ds, &LossSpec::logistic(), &cfg).unwrap();
        assert_eq!(zero_one_error(&tr.final_w, &ds).unwrap(), 0.0);
        assert!(tr.diagnostics.max_risk_increase <= 1e-12);
        let ts: Vec<u64> = tr.checkpoints.iter().map(|c| c.t).collect();
        assert!(ts.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(ts.len(), 101);
    }

    #[test]
    fn flipped_gradient_ascends() {
        let spec = DistributionSpec::<f64>::gaussian(3);
        let ds = sample(&spec, 200, 1).unwrap();
        let cfg = OptimConfig::new(Mode::FullBatch, 3, 0.5, 20).with_fault(Fault::FlipGradientSign);
        let tr = gd_train(&ds, &LossSpec::logistic(), &cfg).unwrap();
        assert!(tr.diagnostics.max_risk_increase > 0.0);
    }

    #[test]
    fn divergence_is_reported() {
        let ds = Dataset::new(1, vec![1.0], vec![-1], meta()).unwrap();
        let cfg = OptimConfig::new(Mode::FullBatch, 1, 1e9, 100).with_fault(Fault::FlipGradientSign);
        let err = gd_train(&ds, &LossSpec::hinge(), &cfg).unwrap_err();
        assert!(matches!(err, LabError::Diverged { iteration: 2, .. }), "{err}");
    }

    #[test]
    fn mode_and_dimension_checked() {
        let ds = Dataset::new(1, vec![1.0], vec![1], meta()).unwrap();
        let cfg = OptimConfig::new(Mode::OnlineSgd, 1, 0.1, 1);
        assert!(gd_train(&ds, &LossSpec::logistic(), &cfg).is_err());
        let cfg = OptimConfig::new(Mode::FullBatch, 2, 0.1, 1);
        assert!(matches!(gd_train(&ds, &LossSpec::logistic(), &cfg), Err(LabError::DimensionMismatch { .. })));
    }

    #[test]
    fn sgd_single_step_and_zero_step_size() {
        let spec = DistributionSpec::<f64>::gaussian(3).with_noise(NoiseModel::Rcn { eta: 0.1 });
        let loss = LossSpec::logistic();
        let cfg = OptimConfig::new(Mode::OnlineSgd, 3, 0.3, 1);
        let tr = sgd_train(&spec, &loss, &cfg, 5, SgdOptions { n_val: 100 }).unwrap();
        let mut stream = spec.stream(5).unwrap();
        let mut x = vec![0.0; 3];
        let y = stream.next_into(&mut x);
        // w0 = 0 so the margin is 0 and l'(0) = -1/2
        for k in 0..3 {
            assert!((tr.final_w[k] - 0.3 * 0.5 * y as f64 * x[k]).abs() < 1e-15);
        }
        let cfg = OptimConfig::new(Mode::OnlineSgd, 3, 0.0, 500).with_w0(vec![1.0, 2.0, 3.0]);
        let tr = sgd_train(&spec, &loss, &cfg, 5, SgdOptions { n_val: 100 }).unwrap();
        assert_eq!(tr.final_w, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn sgd_is_deterministic() {
        let spec = DistributionSpec::<f64>::gaussian(4).with_noise(NoiseModel::Rcn { eta: 0.1 });
        let cfg = OptimConfig::new(Mode::OnlineSgd, 4, 0.05, 3000);
        let a = sgd_train(&spec, &LossSpec::logistic(), &cfg, 9, SgdOptions { n_val: 500 }).unwrap();
        let b = sgd_train(&spec, &LossSpec::logistic(), &cfg, 9, SgdOptions { n_val: 500 }).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn observer_can_stop_early() {
        let spec = DistributionSpec::<f64>::hard_margin_sphere(3, 0.3);
        let ds = sample(&spec, 300, 2).unwrap();
        let cfg = OptimConfig::new(Mode::FullBatch, 3, 1.6, 1000);
        let mut obs = |cp: &Checkpoint<f64>, _: &[f64]| if cp.t >= 100 { Control::Stop } else { Control::Continue };
        let tr = gd_train_observed(&ds, &LossSpec::logistic(), &cfg, None, &mut obs).unwrap();
        assert_eq!(tr.stopped_at, Some(100));
        assert_eq!(tr.checkpoints.last().unwrap().t, 100);
    }
}
