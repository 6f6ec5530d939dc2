//! Error and iteration bounds evaluated at concrete parameters.
//!
//! Every bound is evaluated with explicit constants. A constant with no known
//! value becomes a `multiplier` parameter (default 1) and is echoed in the
//! report.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, LabError, Result};
use crate::loss::{Inverse, LossSpec, SurrogateLoss, TailDescriptor};
use crate::optimizer::IterationCount;

/// Bounds at or above this value are no better than guessing.
pub const VACUITY_THRESHOLD: f64 = 0.5;

/// Confidence parameter used when a query gives none.
pub const DEFAULT_DELTA: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TheoremId {
    /// Population surrogate risk of full-batch GD against a norm-bounded comparator.
    GdPopulation,
    /// Zero-one error of GD on bounded data with a general soft margin.
    ThmBounded,
    CorHardMargin,
    /// Soft margin `phi(gamma) <= C0 gamma^p`.
    PropSoftMargin,
    /// `U`-anti-concentration on bounded data.
    CorAntiConcentration,
    /// Online SGD on sub-exponential data.
    ThmUnbounded,
    CorLogconcave,
    CorSeparablePoly,
    CorSeparableExp,
}

impl TheoremId {
    pub const ALL: [TheoremId; 9] = [
        TheoremId::GdPopulation,
        TheoremId::ThmBounded,
        TheoremId::CorHardMargin,
        TheoremId::PropSoftMargin,
        TheoremId::CorAntiConcentration,
        TheoremId::ThmUnbounded,
        TheoremId::CorLogconcave,
        TheoremId::CorSeparablePoly,
        TheoremId::CorSeparableExp,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TheoremId::GdPopulation => "gd_population",
            TheoremId::ThmBounded => "thm_bounded",
            TheoremId::CorHardMargin => "cor_hard_margin",
            TheoremId::PropSoftMargin => "prop_soft_margin",
            TheoremId::CorAntiConcentration => "cor_anti_concentration",
            TheoremId::ThmUnbounded => "thm_unbounded",
            TheoremId::CorLogconcave => "cor_logconcave",
            TheoremId::CorSeparablePoly => "cor_separable_poly",
            TheoremId::CorSeparableExp => "cor_separable_exp",
        }
    }
}

impl fmt::Display for TheoremId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TheoremId {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        TheoremId::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| LabError::Usage(format!("unknown theorem `{s}`")))
    }
}

/// Numeric inputs of a bound. Absent values are either defaulted (noted in
/// the report) or reported as missing.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundParams {
    pub opt: Option<f64>,
    pub gamma: Option<f64>,
    pub gamma_star: Option<f64>,
    pub eps: Option<f64>,
    pub eps1: Option<f64>,
    pub eps2: Option<f64>,
    pub n: Option<f64>,
    pub b_x: Option<f64>,
    /// Lipschitz constant; defaults to the loss's.
    pub l: Option<f64>,
    /// Smoothness constant; defaults to the loss's.
    pub h: Option<f64>,
    /// Comparator norm.
    pub v: Option<f64>,
    pub c_m: Option<f64>,
    pub u: Option<f64>,
    pub c0: Option<f64>,
    pub p: Option<f64>,
    pub delta: Option<f64>,
    pub w0_to_v_dist: Option<f64>,
    /// Soft-margin value `phi(gamma)`.
    pub phi: Option<f64>,
    pub eta: Option<f64>,
    /// Surrogate risk of the comparator.
    pub f_v: Option<f64>,
    /// Multiplier on suppressed constants of sample-size requirements.
    pub multiplier: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundQuery {
    pub theorem: TheoremId,
    #[serde(default)]
    pub params: BoundParams,
    #[serde(default = "LossSpec::logistic")]
    pub loss: LossSpec<f64>,
}

impl BoundQuery {
    pub fn new(theorem: TheoremId, params: BoundParams) -> Self {
        Self { theorem, params, loss: LossSpec::logistic() }
    }

    pub fn with_loss(mut self, loss: LossSpec<f64>) -> Self {
        self.loss = loss;
        self
    }
}

/// Choices a proof makes internally, echoed for inspection.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Internals {
    pub gamma: Option<f64>,
    /// Comparator norm `V`.
    pub v: Option<f64>,
    pub eps2: Option<f64>,
    /// Truncation level in the sub-exponential argument.
    pub xi: Option<f64>,
    pub eta: Option<f64>,
    /// Sample size the guarantee asks for.
    pub n_required: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundTerm {
    pub name: &'static str,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub theorem: TheoremId,
    pub predicted_t: Option<IterationCount>,
    pub predicted_error: f64,
    pub internals: Internals,
    pub vacuous: bool,
    pub terms: Vec<BoundTerm>,
    pub notes: Vec<String>,
}

impl BoundReport {
    fn new(theorem: TheoremId, terms: Vec<BoundTerm>, t: Option<IterationCount>, internals: Internals) -> Self {
        let predicted_error: f64 = terms.iter().map(|t| t.value).sum();
        Self {
            theorem,
            predicted_t: t,
            predicted_error,
            internals,
            vacuous: !(predicted_error < VACUITY_THRESHOLD),
            terms,
            notes: Vec::new(),
        }
    }

    fn note(mut self, s: impl Into<String>) -> Self {
        self.notes.push(s.into());
        self
    }

    pub fn term(&self, name: &str) -> Option<f64> {
        self.terms.iter().find(|t| t.name == name).map(|t| t.value)
    }
}

fn term(name: &'static str, value: f64) -> BoundTerm {
    BoundTerm { name, value }
}

/// Collects required parameters, reporting all missing ones at once.
struct Need<'a> {
    theorem: TheoremId,
    params: &'a BoundParams,
    missing: Vec<&'static str>,
}

impl<'a> Need<'a> {
    fn new(theorem: TheoremId, params: &'a BoundParams) -> Self {
        Self { theorem, params, missing: Vec::new() }
    }

    fn get(&mut self, name: &'static str, v: Option<f64>) -> f64 {
        match v {
            Some(x) => x,
            None => {
                self.missing.push(name);
                f64::NAN
            }
        }
    }

    fn done(self) -> Result<()> {
        let _ = self.params;
        if self.missing.is_empty() {
            Ok(())
        } else {
            Err(LabError::MissingParams { theorem: self.theorem.to_string(), missing: self.missing })
        }
    }
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        invalid(format!("{name} must be positive, got {v}"))
    }
}

fn check_opt_for_log(opt: f64) -> Result<f64> {
    if opt == 0.0 {
        return Err(LabError::SeparableCase);
    }
    if !(opt > 0.0 && opt < 0.5) {
        return invalid(format!("OPT must lie in (0, 1/2) where log(1/OPT) appears, got {opt}"));
    }
    Ok(opt)
}

fn check_delta(delta: f64) -> Result<f64> {
    if delta > 0.0 && delta < 1.0 {
        Ok(delta)
    } else {
        invalid(format!("delta must lie in (0, 1), got {delta}"))
    }
}

fn inverse_value(loss: &LossSpec<f64>, eps2: f64) -> Result<Option<f64>> {
    Ok(loss.inverse(eps2)?.finite())
}

/// Finite-sample penalty of the GD population guarantee:
/// `4 B V L / sqrt(n) + 8 B V sqrt(2 log(2/delta) / n)`.
pub fn gd_generalization_gap(b_x: f64, v: f64, lipschitz: f64, n: f64, delta: f64) -> f64 {
    4.0 * b_x * v * lipschitz / n.sqrt() + 8.0 * b_x * v * (2.0 * (2.0 / delta).ln() / n).sqrt()
}

fn full_batch_eta(loss: &LossSpec<f64>, p: &BoundParams, b_x: Option<f64>) -> Option<f64> {
    p.eta.or_else(|| {
        let h = p.h.or(loss.smoothness())?;
        b_x.map(|b| 0.4 / (h * b * b))
    })
}

/// Evaluates a bound.
pub fn bound_rhs(q: &BoundQuery) -> Result<BoundReport> {
    let p = &q.params;
    let loss = &q.loss;
    let lip = p.l.unwrap_or_else(|| loss.lipschitz());
    let delta = check_delta(p.delta.unwrap_or(DEFAULT_DELTA))?;
    let id = q.theorem;
    match id {
        TheoremId::GdPopulation => {
            let mut need = Need::new(id, p);
            let f_v = need.get("f_v", p.f_v);
            let b_x = need.get("b_x", p.b_x);
            let v = need.get("v", p.v);
            let n = need.get("n", p.n);
            need.done()?;
            let (b_x, v, n) = (positive("B_X", b_x)?, positive("V", v)?, positive("n", n)?);
            let t = match (full_batch_eta(loss, p, Some(b_x)), p.eps, p.w0_to_v_dist) {
                (Some(eta), Some(eps), Some(dw)) => {
                    Some(crate::optimizer::iterations_for(crate::optimizer::IterationRule::GdGeneric {
                        eta,
                        eps,
                        w0_to_v_sq: dw * dw,
                    })?)
                }
                _ => None,
            };
            let report = BoundReport::new(
                id,
                vec![
                    term("comparator_risk", f_v),
                    term("lipschitz_gap", 4.0 * b_x * v * lip / n.sqrt()),
                    term("confidence_gap", 8.0 * b_x * v * (2.0 * (2.0 / delta).ln() / n).sqrt()),
                ],
                t,
                Internals { v: Some(v), eta: full_batch_eta(loss, p, Some(b_x)), ..Default::default() },
            );
            Ok(report.note("bounds the population surrogate risk, not the zero-one error"))
        }
        TheoremId::ThmBounded => {
            let mut need = Need::new(id, p);
            let opt = need.get("opt", p.opt);
            let gamma = need.get("gamma", p.gamma);
            let eps1 = need.get("eps1", p.eps1);
            let eps2 = need.get("eps2", p.eps2);
            let b_x = need.get("b_x", p.b_x);
            let phi = need.get("phi", p.phi);
            need.done()?;
            let gamma = positive("gamma", gamma)?;
            let b_x = positive("B_X", b_x)?;
            positive("eps1", eps1)?;
            let inv = inverse_value(loss, eps2)?;
            let eta = full_batch_eta(loss, p, Some(b_x));
            let internals = Internals {
                gamma: Some(gamma),
                v: inv.map(|z| z / gamma),
                eps2: Some(eps2),
                eta,
                ..Default::default()
            };
            let t = eta
                .map(|eta| {
                    crate::optimizer::iterations_for(crate::optimizer::IterationRule::GdBounded {
                        eta,
                        eps1,
                        gamma,
                        inverse_eps2: inv.map_or(Inverse::Infinite, Inverse::Finite),
                    })
                })
                .transpose()?;
            let Some(z) = inv else {
                let r = BoundReport::new(id, vec![term("opt_term", f64::INFINITY)], t, internals);
                return Ok(r.note("l^-1(eps2) is infinite: the bound is vacuous"));
            };
            let mut terms = vec![
                term("opt_term", (1.0 + lip * b_x * z / gamma) * opt),
                term("soft_margin", phi),
                term("eps1", eps1),
                term("eps2", eps2),
            ];
            let mut report_notes = Vec::new();
            if let Some(n) = p.n {
                let n = positive("n", n)?;
                terms.push(term("finite_sample", gd_generalization_gap(b_x, z / gamma, lip, n, delta)));
                report_notes.push("finite_sample uses proof constants, not asymptotic".to_string());
            } else {
                report_notes.push("finite-sample term omitted (no n given)".to_string());
            }
            let mut r = BoundReport::new(id, terms, t, internals);
            r.notes = report_notes;
            Ok(r)
        }
        TheoremId::CorHardMargin => {
            let mut need = Need::new(id, p);
            let opt = need.get("opt", p.opt);
            let g = need.get("gamma_star", p.gamma_star.or(p.gamma));
            let b_x = need.get("b_x", p.b_x);
            let eps = need.get("eps", p.eps);
            need.done()?;
            let opt = check_opt_for_log(opt)?;
            let (g, b_x, eps) = (positive("gamma_star", g)?, positive("B_X", b_x)?, positive("eps", eps)?);
            let eta = full_batch_eta(loss, p, Some(b_x));
            let t =
                eta.map(|eta| IterationCount::from_f64(4.0 / eta / eps / (g * g) * (1.0 / (2.0 * opt)).ln().powi(2)));
            let mult = p.multiplier.unwrap_or(1.0);
            let n_req = mult * b_x * b_x * (1.0 / delta).ln() / (g * g * eps * eps);
            let r = BoundReport::new(
                id,
                vec![term("opt", opt), term("margin_term", 2.0 * b_x / g * opt * (2.0 / opt).ln()), term("eps", eps)],
                t,
                Internals {
                    gamma: Some(g),
                    v: loss.inverse(opt)?.finite().map(|z| z / g),
                    eps2: Some(opt),
                    eta,
                    n_required: Some(n_req),
                    ..Default::default()
                },
            );
            Ok(r.note(format!("n_required uses multiplier {mult}")))
        }
        TheoremId::PropSoftMargin | TheoremId::CorAntiConcentration => {
            let mut need = Need::new(id, p);
            let opt = need.get("opt", p.opt);
            let b_x = need.get("b_x", p.b_x);
            let eps = need.get("eps", p.eps);
            let (c0, pe) = if id == TheoremId::PropSoftMargin {
                (need.get("c0", p.c0), need.get("p", p.p))
            } else {
                (2.0 * need.get("u", p.u), 1.0)
            };
            need.done()?;
            let opt = check_opt_for_log(opt)?;
            let (b_x, eps, pe) = (positive("B_X", b_x)?, positive("eps", eps)?, positive("p", pe)?);
            positive("C0", c0)?;
            let gamma = opt.powf(1.0 / (1.0 + pe));
            let eta = full_batch_eta(loss, p, Some(b_x));
            let t = eta.map(|eta| {
                let r = 4.0 / eta / eps * opt.powf(-2.0 / (1.0 + pe)) * (1.0 / (2.0 * opt)).ln().powi(2);
                IterationCount::from_f64(r)
            });
            let mult = p.multiplier.unwrap_or(1.0);
            let n_req =
                mult * opt.powf(-2.0 / (1.0 + pe)) / (eps * eps) * (1.0 / delta).ln() * (1.0 / opt).ln().powi(2);
            let r = BoundReport::new(
                id,
                vec![
                    term("opt_term", (2.0 + b_x * opt.powf(-1.0 / (1.0 + pe)) * (2.0 / opt).ln()) * opt),
                    term("soft_margin", c0 * opt.powf(pe / (1.0 + pe))),
                    term("eps", eps),
                ],
                t,
                Internals { gamma: Some(gamma), eps2: Some(opt), eta, n_required: Some(n_req), ..Default::default() },
            );
            Ok(r.note(format!("n_required uses multiplier {mult}")))
        }
        TheoremId::ThmUnbounded => {
            let mut need = Need::new(id, p);
            let opt = need.get("opt", p.opt);
            let c_m = need.get("c_m", p.c_m);
            let gamma = need.get("gamma", p.gamma);
            let eps1 = need.get("eps1", p.eps1);
            let eps2 = need.get("eps2", p.eps2);
            let phi = need.get("phi", p.phi);
            need.done()?;
            let opt = check_opt_for_log(opt)?;
            let (c_m, gamma, eps1) = (positive("C_m", c_m)?, positive("gamma", gamma)?, positive("eps1", eps1)?);
            let inv = inverse_value(loss, eps2)?;
            let eta = p.eta.or_else(|| p.b_x.map(|b| eps1 / (4.0 * lip * lip * b * b)));
            let t = eta
                .map(|eta| {
                    crate::optimizer::iterations_for(crate::optimizer::IterationRule::SgdUnbounded {
                        eta,
                        eps1,
                        gamma,
                        inverse_eps2: inv.map_or(Inverse::Infinite, Inverse::Finite),
                    })
                })
                .transpose()?;
            let internals = Internals {
                gamma: Some(gamma),
                v: inv.map(|z| z / gamma),
                eps2: Some(eps2),
                xi: Some(c_m * (1.0 / opt).ln()),
                eta,
                ..Default::default()
            };
            let Some(z) = inv else {
                let r = BoundReport::new(id, vec![term("opt_term", f64::INFINITY)], t, internals);
                return Ok(r.note("l^-1(eps2) is infinite: the bound is vacuous"));
            };
            let r = BoundReport::new(
                id,
                vec![
                    term("opt_term", (1.0 + c_m + lip * c_m * z / gamma * (1.0 / opt).ln()) * opt),
                    term("soft_margin", phi),
                    term("eps1", eps1),
                    term("eps2", eps2),
                ],
                t,
                internals,
            );
            Ok(r.note("holds in expectation for the best SGD iterate"))
        }
        TheoremId::CorLogconcave => {
            let mut need = Need::new(id, p);
            let opt = need.get("opt", p.opt);
            let c_m = need.get("c_m", p.c_m);
            let u = need.get("u", p.u);
            let eps = need.get("eps", p.eps);
            need.done()?;
            let opt = check_opt_for_log(opt)?;
            let (c_m, u, eps) = (positive("C_m", c_m)?, positive("U", u)?, positive("eps", eps)?);
            let gamma = (c_m * opt / u).sqrt();
            let eta = p.eta.or_else(|| p.b_x.map(|b| eps / (4.0 * lip * lip * b * b)));
            let t = eta.map(|eta| {
                let r = 2.0 / eta / eps * c_m / u / opt * (1.0 / (2.0 * opt)).ln().powi(2);
                IterationCount::from_f64(r)
            });
            let r = BoundReport::new(
                id,
                vec![
                    term("opt_term", (2.0 + c_m + lip * c_m / gamma * (2.0 / opt).ln().powi(2)) * opt),
                    term("soft_margin", 2.0 * gamma * u),
                    term("eps", eps),
                ],
                t,
                Internals {
                    gamma: Some(gamma),
                    v: loss.inverse(opt)?.finite().map(|z| z / gamma),
                    eps2: Some(opt),
                    xi: Some(c_m * (1.0 / opt).ln()),
                    eta,
                    ..Default::default()
                },
            );
            Ok(r.note("holds in expectation for the best SGD iterate"))
        }
        TheoremId::CorSeparablePoly | TheoremId::CorSeparableExp => {
            let mut need = Need::new(id, p);
            let gamma = need.get("gamma", p.gamma.or(p.gamma_star));
            let eps = need.get("eps", p.eps);
            let b_x = need.get("b_x", p.b_x);
            need.done()?;
            let tail_is_poly = matches!(loss.constants().tail, TailDescriptor::Polynomial { .. });
            if tail_is_poly != (id == TheoremId::CorSeparablePoly) {
                return invalid(format!("{id} does not match the tail of loss `{loss}`"));
            }
            let req = separable_requirements(
                loss,
                gamma,
                eps,
                SeparableOptions { b_x, eta: p.eta, delta, multiplier: p.multiplier.unwrap_or(1.0) },
            )?;
            let r = BoundReport::new(
                id,
                vec![term("eps", eps)],
                Some(req.iterations),
                Internals {
                    gamma: Some(gamma),
                    v: Some(req.v),
                    eta: Some(req.eta),
                    n_required: Some(req.n),
                    ..Default::default()
                },
            );
            Ok(r.note("guarantee holds once n >= n_required"))
        }
    }
}

/// The margin scale a proof picks.
pub fn optimal_gamma(theorem: TheoremId, p: &BoundParams) -> Result<f64> {
    let mut need = Need::new(theorem, p);
    match theorem {
        TheoremId::PropSoftMargin | TheoremId::CorAntiConcentration => {
            let opt = need.get("opt", p.opt);
            let pe = if theorem == TheoremId::PropSoftMargin { need.get("p", p.p) } else { 1.0 };
            need.done()?;
            if !(opt > 0.0 && opt < 1.0) {
                return invalid(format!("OPT must lie in (0, 1), got {opt}"));
            }
            Ok(opt.powf(1.0 / (1.0 + positive("p", pe)?)))
        }
        TheoremId::CorLogconcave => {
            let opt = need.get("opt", p.opt);
            let c_m = need.get("c_m", p.c_m);
            let u = need.get("u", p.u);
            need.done()?;
            if !(opt > 0.0 && opt < 1.0) {
                return invalid(format!("OPT must lie in (0, 1), got {opt}"));
            }
            Ok((positive("C_m", c_m)? * opt / positive("U", u)?).sqrt())
        }
        TheoremId::CorHardMargin => {
            let g = need.get("gamma_star", p.gamma_star);
            need.done()?;
            positive("gamma_star", g)
        }
        other => invalid(format!("{other} does not prescribe a margin scale")),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeparableOptions {
    pub b_x: f64,
    /// Defaults to `(2/5) / (H B^2)`.
    pub eta: Option<f64>,
    pub delta: f64,
    /// Multiplier on the sample-size requirement.
    pub multiplier: f64,
}

impl Default for SeparableOptions {
    fn default() -> Self {
        Self { b_x: 1.0, eta: None, delta: DEFAULT_DELTA, multiplier: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeparableRequirements {
    /// Samples needed.
    pub n: f64,
    pub iterations: IterationCount,
    /// Comparator norm `V`.
    pub v: f64,
    pub eta: f64,
    /// Rate with logarithmic factors and constants dropped.
    pub rate_n: f64,
    pub rate_t: f64,
}

/// Sample size and iteration count for margin-`gamma` separable data.
///
/// With `V` the comparator norm that makes `l(V gamma) <= l(0) eps / 6`,
/// `T = 4 V^2 / (l(0) eta eps)` and `n = 4 C^2 V^2 / (l(0)^2 eps^2)` with
/// `C = B (4 L + 8 sqrt(2 log(2/delta)))`.
pub fn separable_requirements(
    loss: &LossSpec<f64>,
    gamma: f64,
    eps: f64,
    opts: SeparableOptions,
) -> Result<SeparableRequirements> {
    if !(gamma > 0.0 && gamma < 1.0) || !(eps > 0.0 && eps < 1.0) {
        return invalid(format!("gamma and eps must lie in (0, 1), got {gamma}, {eps}"));
    }
    let b_x = positive("B_X", opts.b_x)?;
    let delta = check_delta(opts.delta)?;
    let c = loss.constants();
    let l0 = c.value_at_zero;
    let eta = match opts.eta {
        Some(e) => positive("eta", e)?,
        None => 0.4 / (c.smoothness.ok_or(LabError::NonSmooth("the separable-data step rule"))? * b_x * b_x),
    };
    let (v, rate_n, rate_t) = match c.tail {
        TailDescriptor::Polynomial { p, c0 } => {
            let v = (6.0 * c0 / (l0 * eps)).powf(1.0 / p) / gamma;
            (v, gamma.powi(-2) * eps.powf(-2.0 - 2.0 / p), gamma.powi(-2) * eps.powf(-1.0 - 2.0 / p))
        }
        TailDescriptor::Exponential { p, c0, c1 } => {
            let arg = (6.0 * c0 / (l0 * eps)).ln().max(0.0) / c1;
            (arg.powf(1.0 / p) / gamma, gamma.powi(-2) * eps.powi(-2), gamma.powi(-2) / eps)
        }
        TailDescriptor::ZeroBeyond { from } => (from / gamma, gamma.powi(-2) * eps.powi(-2), gamma.powi(-2) / eps),
    };
    // the tail bounds only apply once V gamma >= 1
    let v = v.max(1.0 / gamma);
    let big_c = b_x * (4.0 * c.lipschitz + 8.0 * (2.0 * (2.0 / delta).ln()).sqrt());
    let n = opts.multiplier * 4.0 * big_c * big_c * v * v / (l0 * l0 * eps * eps);
    let t = 4.0 * v * v / (l0 * eta * eps);
    Ok(SeparableRequirements { n, iterations: IterationCount::from_f64(t), v, eta, rate_n, rate_t })
}
