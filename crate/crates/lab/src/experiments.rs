//! Parameter sweeps. Every cell of a sweep gets its own seed and runs
//! independently; rows come back in grid order whatever the scheduling.

use std::collections::BTreeMap;
use std::path::PathBuf;

use hgdlab::bounds::{bound_rhs, separable_requirements, BoundParams, BoundQuery, SeparableOptions, TheoremId};
use hgdlab::metrics::{random_directions, soft_margin_curve, surrogate_risk, zero_one_error};
use hgdlab::optimizer::{
    default_step_size, gd_train_observed, sgd_train, sgd_train_observed, CheckpointSchedule, Control, IterationCount,
    Mode, OptimConfig, SgdOptions, StepRule,
};
use hgdlab::rng::derive_seed;
use hgdlab::scalar::binomial_half_width;
use hgdlab::synthdata::{sample, DistributionSpec, NoiseModel};
use hgdlab::{Dataset64, LabError, LossSpec64, Result, SurrogateLoss};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ExperimentConfig, ExperimentId, DEFAULT_N_TEST};
use crate::fit::{fit_points, ScalingFit};
use crate::table::{Table, Value};

/// Marker written into the `flag` column of a row whose measurement exceeds its bound.
pub const BOUND_VIOLATION: &str = "BOUND-VIOLATION";

const TEST_TAG: u64 = 0x7e57;

/// Seed of one sweep cell.
pub fn run_seed(base_seed: u64, grid_index: usize, repeat: usize) -> u64 {
    derive_seed(base_seed, &[grid_index as u64, repeat as u64])
}

fn test_seed(run: u64) -> u64 {
    derive_seed(run, &[TEST_TAG])
}

/// Aggregate over the repeats of one grid point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupStat {
    pub group: String,
    pub x: f64,
    pub runs: usize,
    pub failed: usize,
    pub mean: Option<f64>,
    /// Three standard errors of the mean.
    pub half_width: Option<f64>,
    pub mean_bound: Option<f64>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub experiment: ExperimentId,
    pub config: ExperimentConfig,
    pub groups: Vec<GroupStat>,
    pub fits: BTreeMap<String, ScalingFit>,
    pub violations: usize,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub table: Table,
    pub summary: Summary,
}

#[derive(Debug, Clone)]
pub struct Artifacts {
    pub csv: PathBuf,
    pub summary_json: PathBuf,
    pub output: ExperimentOutput,
}

/// Runs an experiment and writes `<id>.csv` and `<id>.summary.json`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Artifacts> {
    cfg.validate()?;
    let dir = cfg.prepare_out_dir()?;
    let output = compute_experiment(cfg)?;
    let csv = dir.join(format!("{}.csv", cfg.experiment));
    let summary_json = dir.join(format!("{}.summary.json", cfg.experiment));
    output.table.write_csv(&csv)?;
    hgdlab::io::write_json_file(&output.summary, &summary_json)?;
    Ok(Artifacts { csv, summary_json, output })
}

/// Runs an experiment in memory.
pub fn compute_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    match cfg.experiment {
        ExperimentId::HardMarginScaling => bound_sweep(cfg, hard_margin_cell),
        ExperimentId::GaussianSqrtScaling => bound_sweep(cfg, logconcave_cell),
        ExperimentId::UnboundedSgd => bound_sweep(cfg, unbounded_cell),
        ExperimentId::SeparableTails => separable_tails(cfg),
        ExperimentId::SoftMarginCurves => soft_margin_curves(cfg),
        ExperimentId::SgdFastRate => sgd_fast_rate(cfg),
    }
}

fn mean_and_half_width(vals: &[f64]) -> (Option<f64>, Option<f64>) {
    if vals.is_empty() {
        return (None, None);
    }
    let k = vals.len() as f64;
    let m = vals.iter().sum::<f64>() / k;
    if vals.len() < 2 {
        return (Some(m), None);
    }
    let var = vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (k - 1.0);
    (Some(m), Some(3.0 * (var / k).sqrt()))
}

fn count_value(c: IterationCount) -> Value {
    match c {
        IterationCount::Finite(t) => Value::from(t),
        IterationCount::Infinite => Value::from("inf"),
    }
}

fn loss_of(cfg: &ExperimentConfig) -> Result<LossSpec64> {
    cfg.overrides.loss.as_deref().unwrap_or("logistic").parse()
}

/// Iterations actually run: the prescription, clipped by the configured cap.
fn clip(prescribed: IterationCount, cap: Option<u64>) -> Result<(u64, bool)> {
    match (prescribed, cap) {
        (IterationCount::Finite(t), Some(c)) if t > c => Ok((c, true)),
        (IterationCount::Finite(t), _) => Ok((t, false)),
        (IterationCount::Infinite, Some(c)) => Ok((c, true)),
        (IterationCount::Infinite, None) => {
            Err(LabError::Usage("the prescribed iteration count is infinite; set max_iterations".into()))
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Measured {
    err: f64,
    surrogate: f64,
    half_width: f64,
}

fn measure(w: &[f64], test: &Dataset64, loss: &LossSpec64) -> Result<Measured> {
    let err = zero_one_error(w, test)?;
    Ok(Measured { err, surrogate: surrogate_risk(w, test, loss)?, half_width: binomial_half_width(err, test.len()) })
}

/// Setup and outcome of one bound-checking run.
struct BoundRun {
    opt: f64,
    n: Option<usize>,
    eps: f64,
    eta: f64,
    t_prescribed: IterationCount,
    t_run: u64,
    capped: bool,
    bound: f64,
    vacuous: bool,
    measured: std::result::Result<Measured, String>,
}

type CellFn = fn(&ExperimentConfig, f64, u64) -> Result<BoundRun>;

fn bound_sweep(cfg: &ExperimentConfig, cell: CellFn) -> Result<ExperimentOutput> {
    let grid: Vec<(usize, f64, usize)> =
        cfg.sweep.opt.iter().enumerate().flat_map(|(i, &o)| (0..cfg.repeats).map(move |r| (i, o, r))).collect();
    let runs: Vec<Result<(usize, f64, usize, u64, BoundRun)>> = grid
        .par_iter()
        .map(|&(i, opt, r)| {
            let seed = run_seed(cfg.base_seed, i, r);
            cell(cfg, opt, seed).map(|run| (i, opt, r, seed, run))
        })
        .collect();
    let mut table = Table::new([
        "opt",
        "repeat",
        "seed",
        "n",
        "eps",
        "eta",
        "t_prescribed",
        "t_run",
        "capped",
        "measured_err",
        "half_width",
        "measured_surrogate",
        "bound_value",
        "vacuous",
        "flag",
        "status",
    ]);
    let mut violations = 0;
    let mut per_opt: BTreeMap<usize, (f64, Vec<f64>, Vec<f64>, usize)> = BTreeMap::new();
    for run in runs {
        let (i, opt, r, seed, run) = run?;
        let entry = per_opt.entry(i).or_insert_with(|| (opt, Vec::new(), Vec::new(), 0));
        entry.2.push(run.bound);
        let (m_err, m_hw, m_sur, flag, status) = match &run.measured {
            Ok(m) => {
                entry.1.push(m.err);
                let violated = !run.vacuous && m.err > run.bound + m.half_width;
                violations += usize::from(violated);
                (
                    Value::from(m.err),
                    Value::from(m.half_width),
                    Value::from(m.surrogate),
                    Value::from(if violated { BOUND_VIOLATION } else { "" }),
                    Value::from("ok"),
                )
            }
            Err(e) => {
                entry.3 += 1;
                (Value::Missing, Value::Missing, Value::Missing, Value::from(""), Value::from(e.clone()))
            }
        };
        table.push(vec![
            Value::from(run.opt),
            Value::from(r),
            Value::from(seed),
            run.n.map_or(Value::Missing, Value::from),
            Value::from(run.eps),
            Value::from(run.eta),
            count_value(run.t_prescribed),
            Value::from(run.t_run),
            Value::from(run.capped),
            m_err,
            m_hw,
            m_sur,
            Value::from(run.bound),
            Value::from(run.vacuous),
            flag,
            status,
        ]);
    }
    let mut groups = Vec::new();
    let mut points = Vec::new();
    for (_, (opt, errs, bounds, failed)) in per_opt {
        let (mean, half_width) = mean_and_half_width(&errs);
        if let Some(m) = mean {
            points.push((opt, m));
        }
        groups.push(GroupStat {
            group: format!("opt={opt}"),
            x: opt,
            runs: errs.len() + failed,
            failed,
            mean,
            half_width,
            mean_bound: mean_and_half_width(&bounds).0,
            extra: BTreeMap::new(),
        });
    }
    let mut fits = BTreeMap::new();
    let mut notes = Vec::new();
    match fit_points(&points) {
        Ok(f) => {
            fits.insert("measured_err_vs_opt".to_string(), f);
        }
        Err(e) => notes.push(format!("no scaling fit: {e}")),
    }
    let capped = table.rows.iter().filter(|r| r[8].is_true()).count();
    if capped > 0 {
        notes.push(format!("{capped} run(s) stopped at max_iterations before the prescribed T"));
    }
    Ok(ExperimentOutput {
        table,
        summary: Summary { experiment: cfg.experiment, config: cfg.clone(), groups, fits, violations, notes },
    })
}

fn hard_margin_cell(cfg: &ExperimentConfig, opt: f64, seed: u64) -> Result<BoundRun> {
    let o = &cfg.overrides;
    let d = o.d.unwrap_or(10);
    let gamma_star = o.gamma_star.unwrap_or(0.5);
    let eps = o.eps.unwrap_or(0.02);
    let loss = loss_of(cfg)?;
    let spec = DistributionSpec::<f64>::hard_margin_sphere(d, gamma_star).with_noise(NoiseModel::Rcn { eta: opt });
    spec.validate()?;
    let params = BoundParams {
        opt: Some(opt),
        gamma_star: Some(gamma_star),
        b_x: Some(spec.b_x),
        eps: Some(eps),
        eta: o.eta,
        multiplier: o.multiplier,
        ..Default::default()
    };
    let report = bound_rhs(&BoundQuery::new(TheoremId::CorHardMargin, params).with_loss(loss))?;
    let eta = report.internals.eta.ok_or(LabError::NonSmooth("the full-batch step rule"))?;
    let t_prescribed = report.predicted_t.unwrap_or(IterationCount::Infinite);
    let (t_run, capped) = clip(t_prescribed, o.max_iterations)?;
    let n = o.n.unwrap_or_else(|| report.internals.n_required.unwrap_or(0.0).ceil() as usize).max(1);
    let measured = (|| {
        let train = sample(&spec, n, seed)?;
        let test = sample(&spec, o.n_test.unwrap_or(DEFAULT_N_TEST), test_seed(seed))?;
        let oc = OptimConfig::new(Mode::FullBatch, d, eta, t_run).with_checkpoints(CheckpointSchedule::Evenly(10));
        let trace = gd_train_observed(&train, &loss, &oc, None, &mut hgdlab::optimizer::NoObserver)?;
        measure(&trace.final_w, &test, &loss)
    })()
    .map_err(|e| e.to_string());
    Ok(BoundRun {
        opt,
        n: Some(n),
        eps,
        eta,
        t_prescribed,
        t_run,
        capped,
        bound: report.predicted_error,
        vacuous: report.vacuous,
        measured,
    })
}

/// Runs SGD on `spec` and measures the best iterate.
fn sgd_measure(
    spec: &DistributionSpec<f64>,
    loss: &LossSpec64,
    eta: f64,
    t_run: u64,
    seed: u64,
    cfg: &ExperimentConfig,
    eps: f64,
) -> std::result::Result<Measured, String> {
    (|| {
        let oc = OptimConfig::new(Mode::OnlineSgd, spec.d, eta, t_run).with_checkpoints(CheckpointSchedule::Evenly(50));
        let n_val = cfg.overrides.n_val.unwrap_or_else(|| SgdOptions::for_accuracy(eps).n_val);
        let trace = sgd_train(spec, loss, &oc, seed, SgdOptions { n_val })?;
        let test = sample(spec, cfg.overrides.n_test.unwrap_or(DEFAULT_N_TEST), test_seed(seed))?;
        measure(&trace.best_w, &test, loss)
    })()
    .map_err(|e| e.to_string())
}

fn logconcave_cell(cfg: &ExperimentConfig, opt: f64, seed: u64) -> Result<BoundRun> {
    let o = &cfg.overrides;
    let d = o.d.unwrap_or(10);
    let eps = o.eps.unwrap_or(0.01);
    let loss = loss_of(cfg)?;
    let spec = DistributionSpec::<f64>::gaussian(d).with_noise(NoiseModel::Rcn { eta: opt });
    spec.validate()?;
    let a = spec.analytic();
    let params = BoundParams {
        opt: Some(opt),
        c_m: a.subexp_norm,
        u: a.anti_concentration,
        eps: Some(eps),
        b_x: Some(spec.b_x),
        eta: o.eta,
        ..Default::default()
    };
    let report = bound_rhs(&BoundQuery::new(TheoremId::CorLogconcave, params).with_loss(loss))?;
    let eta = report.internals.eta.expect("b_x is set");
    let t_prescribed = report.predicted_t.unwrap_or(IterationCount::Infinite);
    let (t_run, capped) = clip(t_prescribed, Some(o.max_iterations.unwrap_or(200_000_000)))?;
    let measured = sgd_measure(&spec, &loss, eta, t_run, seed, cfg, eps);
    Ok(BoundRun {
        opt,
        n: None,
        eps,
        eta,
        t_prescribed,
        t_run,
        capped,
        bound: report.predicted_error,
        vacuous: report.vacuous,
        measured,
    })
}

fn unbounded_cell(cfg: &ExperimentConfig, opt: f64, seed: u64) -> Result<BoundRun> {
    let o = &cfg.overrides;
    let d = o.d.unwrap_or(5);
    let eps = o.eps.unwrap_or(0.05);
    let gamma = o.gamma.unwrap_or(0.1);
    let loss = loss_of(cfg)?;
    let spec = DistributionSpec::<f64>::gaussian(d).with_noise(NoiseModel::Rcn { eta: opt });
    spec.validate()?;
    let a = spec.analytic();
    let phi = a
        .soft_margin
        .as_ref()
        .and_then(|f| f.bound(gamma))
        .ok_or_else(|| LabError::Usage("no analytic soft margin for this family".into()))?;
    let params = BoundParams {
        opt: Some(opt),
        c_m: a.subexp_norm,
        gamma: Some(gamma),
        eps1: Some(eps),
        eps2: Some(eps),
        phi: Some(phi.min(1.0)),
        b_x: Some(spec.b_x),
        eta: o.eta,
        ..Default::default()
    };
    let report = bound_rhs(&BoundQuery::new(TheoremId::ThmUnbounded, params).with_loss(loss))?;
    let eta = report.internals.eta.expect("b_x is set");
    let t_prescribed = report.predicted_t.unwrap_or(IterationCount::Infinite);
    let (t_run, capped) = clip(t_prescribed, Some(o.max_iterations.unwrap_or(200_000_000)))?;
    let measured = sgd_measure(&spec, &loss, eta, t_run, seed, cfg, eps);
    Ok(BoundRun {
        opt,
        n: None,
        eps,
        eta,
        t_prescribed,
        t_run,
        capped,
        bound: report.predicted_error,
        vacuous: report.vacuous,
        measured,
    })
}

/// Per-loss outcome of one separable run.
struct TailRun {
    t_target: Vec<Option<u64>>,
    t_target_surrogate: Vec<Option<u64>>,
    t_prescribed: Vec<IterationCount>,
    n_required: Vec<f64>,
    t_run: u64,
    stopped_at: u64,
    final_err: f64,
    final_surrogate: f64,
}

fn separable_tails(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let o = &cfg.overrides;
    let d = o.d.unwrap_or(10);
    let gamma_star = o.gamma_star.unwrap_or(0.1);
    let n = o.n.unwrap_or(2000);
    let per_doubling = o.checkpoints_per_doubling.unwrap_or(16);
    let eps_grid = cfg.sweep.eps.clone();
    let losses: Vec<LossSpec64> = cfg.sweep.losses.iter().map(|s| s.parse()).collect::<Result<_>>()?;
    let spec = DistributionSpec::<f64>::hard_margin_sphere(d, gamma_star);
    spec.validate()?;
    let grid: Vec<(usize, usize)> = (0..losses.len()).flat_map(|l| (0..cfg.repeats).map(move |r| (l, r))).collect();

    let runs: Vec<Result<std::result::Result<TailRun, String>>> = grid
        .par_iter()
        .map(|&(li, r)| {
            let loss = &losses[li];
            let seed = run_seed(cfg.base_seed, li, r);
            let eta = match o.eta {
                Some(e) => e,
                None => default_step_size(loss, spec.b_x, StepRule::FullBatch)?,
            };
            let opts = SeparableOptions {
                b_x: spec.b_x,
                eta: Some(eta),
                multiplier: o.multiplier.unwrap_or(1.0),
                ..Default::default()
            };
            let reqs: Vec<_> =
                eps_grid.iter().map(|&e| separable_requirements(loss, gamma_star, e, opts)).collect::<Result<_>>()?;
            let longest = reqs.iter().map(|q| q.iterations).max_by_key(|c| c.finite().unwrap_or(u64::MAX)).unwrap();
            let (t_run, _) = clip(longest, o.max_iterations)?;
            let l0 = loss.value_at_zero();
            let outcome = (|| -> Result<TailRun> {
                let train = sample(&spec, n, seed)?;
                let test = sample(&spec, o.n_test.unwrap_or(DEFAULT_N_TEST), test_seed(seed))?;
                let mut t_target = vec![None; eps_grid.len()];
                let mut t_sur = vec![None; eps_grid.len()];
                let mut failure = None;
                let mut last = (0u64, f64::NAN);
                let mut observer = |c: &hgdlab::optimizer::Checkpoint<f64>, w: &[f64]| {
                    // w_0 = 0 predicts one class everywhere; nothing to measure
                    if c.t == 0 {
                        return Control::Continue;
                    }
                    let err = match zero_one_error(w, &test) {
                        Ok(e) => e,
                        Err(e) => {
                            failure = Some(e);
                            return Control::Stop;
                        }
                    };
                    last = (c.t, err);
                    for (k, &e) in eps_grid.iter().enumerate() {
                        if t_target[k].is_none() && err <= e {
                            t_target[k] = Some(c.t);
                        }
                        if t_sur[k].is_none() && c.emp_risk / l0 <= e {
                            t_sur[k] = Some(c.t);
                        }
                    }
                    if t_target.iter().chain(t_sur.iter()).all(Option::is_some) {
                        Control::Stop
                    } else {
                        Control::Continue
                    }
                };
                let oc = OptimConfig::new(Mode::FullBatch, d, eta, t_run)
                    .with_checkpoints(CheckpointSchedule::Geometric(per_doubling));
                let trace = gd_train_observed(&train, loss, &oc, None, &mut observer)?;
                if let Some(e) = failure {
                    return Err(e);
                }
                Ok(TailRun {
                    t_target,
                    t_target_surrogate: t_sur,
                    t_prescribed: reqs.iter().map(|q| q.iterations).collect(),
                    n_required: reqs.iter().map(|q| q.n).collect(),
                    t_run,
                    stopped_at: last.0,
                    final_err: last.1,
                    final_surrogate: surrogate_risk(&trace.final_w, &test, loss)?,
                })
            })();
            Ok(outcome.map_err(|e| e.to_string()))
        })
        .collect();

    let mut table = Table::new([
        "loss",
        "eps",
        "inv_eps",
        "repeat",
        "seed",
        "n",
        "t_target",
        "t_target_surrogate",
        "t_prescribed",
        "t_run",
        "stopped_at",
        "measured_err",
        "measured_surrogate",
        "bound_value",
        "n_required",
        "vacuous",
        "status",
    ]);
    // (loss, eps) -> measured iterations over repeats
    let mut hits: BTreeMap<(usize, usize), (Vec<f64>, Vec<f64>, usize)> = BTreeMap::new();
    for (&(li, r), run) in grid.iter().zip(runs) {
        let run = run?;
        let seed = run_seed(cfg.base_seed, li, r);
        for (k, &e) in eps_grid.iter().enumerate() {
            let entry = hits.entry((li, k)).or_default();
            let base = vec![
                Value::from(losses[li].id()),
                Value::from(e),
                Value::from(1.0 / e),
                Value::from(r),
                Value::from(seed),
                Value::from(n),
            ];
            let rest = match &run {
                Ok(tr) => {
                    match tr.t_target[k] {
                        Some(t) => entry.0.push(t.max(1) as f64),
                        None => entry.2 += 1,
                    }
                    if let Some(t) = tr.t_target_surrogate[k] {
                        entry.1.push(t.max(1) as f64);
                    }
                    vec![
                        Value::from(tr.t_target[k]),
                        Value::from(tr.t_target_surrogate[k]),
                        count_value(tr.t_prescribed[k]),
                        Value::from(tr.t_run),
                        Value::from(tr.stopped_at),
                        Value::from(tr.final_err),
                        Value::from(tr.final_surrogate),
                        Value::from(e),
                        Value::from(tr.n_required[k]),
                        // the guarantee needs n >= n_required
                        Value::from((n as f64) < tr.n_required[k]),
                        Value::from("ok"),
                    ]
                }
                Err(msg) => {
                    entry.2 += 1;
                    let mut v = vec![Value::Missing; 10];
                    v.push(Value::from(msg.clone()));
                    v
                }
            };
            table.push(base.into_iter().chain(rest).collect());
        }
    }

    let mut groups = Vec::new();
    let mut fits = BTreeMap::new();
    let mut notes = Vec::new();
    for (li, loss) in losses.iter().enumerate() {
        let mut pts = Vec::new();
        let mut pts_sur = Vec::new();
        for (k, &e) in eps_grid.iter().enumerate() {
            let (ts, ts_sur, missed) = &hits[&(li, k)];
            let (mean, half_width) = mean_and_half_width(ts);
            let mut extra = BTreeMap::new();
            extra.insert("missed".to_string(), *missed as f64);
            if let (Some(m), 0) = (mean, missed) {
                pts.push((1.0 / e, m));
            }
            if let Some(m) = mean_and_half_width(ts_sur).0 {
                extra.insert("mean_t_target_surrogate".to_string(), m);
                if ts_sur.len() == cfg.repeats {
                    pts_sur.push((1.0 / e, m));
                }
            }
            groups.push(GroupStat {
                group: loss.id(),
                x: e,
                runs: cfg.repeats,
                failed: *missed,
                mean,
                half_width,
                mean_bound: Some(e),
                extra,
            });
        }
        match fit_points(&pts) {
            Ok(f) => {
                fits.insert(format!("{}:t_target_vs_inv_eps", loss.id()), f);
            }
            Err(e) => notes.push(format!("{}: no test-error fit ({e})", loss.id())),
        }
        match fit_points(&pts_sur) {
            Ok(f) => {
                fits.insert(format!("{}:t_target_surrogate_vs_inv_eps", loss.id()), f);
            }
            Err(e) => notes.push(format!("{}: no surrogate fit ({e})", loss.id())),
        }
    }
    Ok(ExperimentOutput {
        table,
        summary: Summary { experiment: cfg.experiment, config: cfg.clone(), groups, fits, violations: 0, notes },
    })
}

fn soft_margin_curves(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let o = &cfg.overrides;
    let n = o.n.unwrap_or(1_000_000);
    let n_dirs = o.n_directions.unwrap_or(50);
    let gammas = cfg.sweep.gammas.clone();
    let mut specs: Vec<DistributionSpec<f64>> = cfg.sweep.dims.iter().map(|&d| DistributionSpec::gaussian(d)).collect();
    specs.push(DistributionSpec::hard_margin_sphere(o.d.unwrap_or(10), o.gamma_star.unwrap_or(0.25)));
    for s in &specs {
        s.validate()?;
    }
    let mut table = Table::new([
        "family",
        "d",
        "repeat",
        "seed",
        "direction",
        "gamma",
        "phi_hat",
        "phi_bound",
        "half_width",
        "flag",
    ]);
    let mut violations = 0;
    let mut groups = Vec::new();
    let mut notes = Vec::new();
    // one data set at a time: each holds n * d coordinates
    for (gi, spec) in specs.iter().enumerate() {
        for r in 0..cfg.repeats {
            let seed = run_seed(cfg.base_seed, gi, r);
            let ds = sample(spec, n, seed)?;
            let form = spec.analytic().soft_margin;
            // random directions only make sense where every direction has the same law
            let dirs = if spec.family == hgdlab::Family::Gaussian {
                random_directions(spec.d, n_dirs, derive_seed(seed, &[1]), Some(&spec.v_bar))?
            } else {
                vec![spec.v_bar.clone()]
            };
            let curves: Vec<_> = dirs
                .par_iter()
                .map(|u| {
                    let c = soft_margin_curve(ds.features(), spec.d, u, &gammas)?;
                    Ok(match &form {
                        Some(f) => c.with_bound(f),
                        None => c,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let mut worst = f64::NEG_INFINITY;
            for (k, c) in curves.iter().enumerate() {
                let hw = c.half_widths();
                for (j, &g) in gammas.iter().enumerate() {
                    let bound = c.phi_bound.as_ref().map(|b| b[j]);
                    let violated = bound.is_some_and(|b| c.phi_hat[j] > b + hw[j]);
                    violations += usize::from(violated);
                    if let Some(b) = bound {
                        worst = worst.max(c.phi_hat[j] - b - hw[j]);
                    }
                    table.push(vec![
                        Value::from(spec.id()),
                        Value::from(spec.d),
                        Value::from(r),
                        Value::from(seed),
                        Value::from(k),
                        Value::from(g),
                        Value::from(c.phi_hat[j]),
                        Value::from(bound),
                        Value::from(hw[j]),
                        Value::from(if violated { BOUND_VIOLATION } else { "" }),
                    ]);
                }
            }
            let planted = &curves[0];
            if let Some(j) = gammas.iter().position(|&g| g == 0.1) {
                notes.push(format!("{} seed {seed}: planted phi_hat(0.1) = {}", spec.id(), planted.phi_hat[j]));
            }
            let mut extra = BTreeMap::new();
            extra.insert("worst_excess_over_bound".to_string(), worst);
            extra.insert("directions".to_string(), dirs.len() as f64);
            groups.push(GroupStat {
                group: spec.id(),
                x: spec.d as f64,
                runs: 1,
                failed: 0,
                mean: None,
                half_width: None,
                mean_bound: None,
                extra,
            });
        }
    }
    Ok(ExperimentOutput {
        table,
        summary: Summary {
            experiment: cfg.experiment,
            config: cfg.clone(),
            groups,
            fits: BTreeMap::new(),
            violations,
            notes,
        },
    })
}

fn sgd_fast_rate(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let o = &cfg.overrides;
    let d = o.d.unwrap_or(10);
    let loss = loss_of(cfg)?;
    let spec = DistributionSpec::<f64>::gaussian(d);
    spec.validate()?;
    let eta = match o.eta {
        Some(e) => e,
        None => default_step_size(&loss, spec.b_x, StepRule::SgdFastRate)?,
    };
    let mut horizons = cfg.sweep.iterations.clone();
    horizons.sort_unstable();
    horizons.dedup();
    let t_max = *horizons.last().expect("validated non-empty");
    let mut schedule = CheckpointSchedule::Geometric(o.checkpoints_per_doubling.unwrap_or(8)).points(t_max);
    schedule.extend(&horizons);
    schedule.sort_unstable();
    schedule.dedup();
    let n_val = o.n_val.unwrap_or(10_000);
    let n_test = o.n_test.unwrap_or(DEFAULT_N_TEST);

    // checkpoint t -> (validation risk, test surrogate, test error)
    type Track = Vec<(u64, f64, f64, f64)>;
    let runs: Vec<std::result::Result<Track, String>> = (0..cfg.repeats)
        .into_par_iter()
        .map(|r| {
            let seed = run_seed(cfg.base_seed, 0, r);
            (|| -> Result<Track> {
                let test = sample(&spec, n_test, test_seed(seed))?;
                let mut track = Vec::new();
                let mut failure = None;
                let mut obs = |c: &hgdlab::optimizer::Checkpoint<f64>, w: &[f64]| {
                    if c.t == 0 {
                        return Control::Continue;
                    }
                    match (surrogate_risk(w, &test, &loss), zero_one_error(w, &test)) {
                        (Ok(s), Ok(e)) => track.push((c.t, c.emp_risk, s, e)),
                        (Err(e), _) | (_, Err(e)) => {
                            failure = Some(e);
                            return Control::Stop;
                        }
                    }
                    Control::Continue
                };
                let oc = OptimConfig::new(Mode::OnlineSgd, d, eta, t_max)
                    .with_checkpoints(CheckpointSchedule::Explicit(schedule.clone()));
                sgd_train_observed(&spec, &loss, &oc, seed, SgdOptions { n_val }, &mut obs)?;
                match failure {
                    Some(e) => Err(e),
                    None => Ok(track),
                }
            })()
            .map_err(|e| e.to_string())
        })
        .collect();

    let mut table = Table::new([
        "t",
        "repeat",
        "seed",
        "eta",
        "best_t",
        "measured_surrogate",
        "suboptimality",
        "measured_err",
        "bound_value",
        "vacuous",
        "status",
    ]);
    let mut per_t: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
    for (r, run) in runs.iter().enumerate() {
        let seed = run_seed(cfg.base_seed, 0, r);
        for &t in &horizons {
            let head = vec![Value::from(t), Value::from(r), Value::from(seed), Value::from(eta)];
            let rest = match run {
                Ok(track) => {
                    let best = track
                        .iter()
                        .filter(|c| c.0 <= t)
                        .min_by(|a, b| a.1.total_cmp(&b.1))
                        .expect("t = 0 is always a checkpoint");
                    // inf over comparators is 0: F(V v) -> 0 as V grows on noise-free data
                    let subopt = best.2;
                    per_t.entry(t).or_default().push(subopt);
                    vec![
                        Value::from(best.0),
                        Value::from(best.2),
                        Value::from(subopt),
                        Value::from(best.3),
                        Value::Missing,
                        Value::Missing,
                        Value::from("ok"),
                    ]
                }
                Err(msg) => {
                    let mut v = vec![Value::Missing; 6];
                    v.push(Value::from(msg.clone()));
                    v
                }
            };
            table.push(head.into_iter().chain(rest).collect());
        }
    }
    let mut groups = Vec::new();
    let mut pts = Vec::new();
    for (t, vals) in &per_t {
        let (mean, half_width) = mean_and_half_width(vals);
        if let Some(m) = mean {
            pts.push((*t as f64, m));
        }
        groups.push(GroupStat {
            group: format!("t={t}"),
            x: *t as f64,
            runs: vals.len(),
            failed: cfg.repeats - vals.len(),
            mean,
            half_width,
            mean_bound: None,
            extra: BTreeMap::new(),
        });
    }
    let mut fits = BTreeMap::new();
    let mut notes = vec!["suboptimality is measured against inf_v F(v) = 0".to_string()];
    match fit_points(&pts) {
        Ok(f) => {
            fits.insert("suboptimality_vs_t".to_string(), f);
        }
        Err(e) => notes.push(format!("no scaling fit: {e}")),
    }
    Ok(ExperimentOutput {
        table,
        summary: Summary { experiment: cfg.experiment, config: cfg.clone(), groups, fits, violations: 0, notes },
    })
}
