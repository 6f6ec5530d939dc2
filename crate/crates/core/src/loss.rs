//! Convex, decreasing surrogate losses for the zero-one loss.
//!
//! Every built-in loss carries its exact Lipschitz constant `L`, smoothness
//! constant `H` (absent for the hinge), value at zero and a tail descriptor.
//! The polynomial and exponential tail families are built piecewise around
//! `z = 1`: the prescribed tail for `z >= 1`, the quadratic matching value,
//! slope and curvature of the tail at `1` on `[0, 1]`, and the tangent line of
//! that quadratic for `z < 0`. The result is `C^1` everywhere and `C^2` at the
//! tail junction. When the construction has `l(0) > 1` the whole loss is
//! divided by `l(0)`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{domain, invalid, usage, LabError, Result};
use crate::scalar::Scalar;

/// Anything with the shape of a surrogate loss. Implemented by [`LossSpec`];
/// the validation routine accepts any implementor so hand-built tables can be
/// checked against the same axioms.
pub trait SurrogateLoss<T: Scalar>: Send + Sync {
    fn value(&self, z: T) -> T;
    fn derivative(&self, z: T) -> T;
    fn lipschitz(&self) -> T;
    fn smoothness(&self) -> Option<T>;

    fn value_at_zero(&self) -> T {
        self.value(T::zero())
    }

    #[inline]
    fn value_and_derivative(&self, z: T) -> (T, T) {
        (self.value(z), self.derivative(z))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LossKind<T> {
    Logistic,
    Hinge,
    /// `C0 * z^(-p)` for `z >= 1`.
    PolyTail {
        p: T,
        c0: T,
    },
    /// `C0 * exp(-C1 * z^p)` for `z >= 1`.
    ExpTail {
        p: T,
        c0: T,
        c1: T,
    },
}

/// Tail class of a loss, with the constants of the *effective* (possibly
/// rescaled) loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum TailDescriptor<T> {
    /// `l(z) <= c0 * z^(-p)` for `z >= 1`.
    Polynomial { p: T, c0: T },
    /// `l(z) <= c0 * exp(-c1 * z^p)` for `z >= 1`.
    Exponential { p: T, c0: T, c1: T },
    /// `l(z) = 0` for `z >= from`.
    ZeroBeyond { from: T },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossConstants<T> {
    pub lipschitz: T,
    pub smoothness: Option<T>,
    pub value_at_zero: T,
    pub tail: TailDescriptor<T>,
    /// Factor the raw construction was multiplied by to enforce `l(0) <= 1`.
    pub scale: T,
}

/// Result of the generalized inverse `inf { z : l(z) <= t }`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Inverse<T> {
    Finite(T),
    /// The loss never reaches the level (e.g. `t = 0` for the logistic loss).
    Infinite,
}

impl<T: Scalar> Inverse<T> {
    pub fn finite(self) -> Option<T> {
        match self {
            Inverse::Finite(z) => Some(z),
            Inverse::Infinite => None,
        }
    }
}

/// Piecewise construction shared by the tail families, before rescaling.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Junction {
    /// Tail value at 1.
    v1: f64,
    /// `-tail'(1)`.
    slope: f64,
    /// `tail''(1)`.
    curvature: f64,
}

impl Junction {
    fn value_at_zero(&self) -> f64 {
        self.v1 + self.slope + 0.5 * self.curvature
    }

    fn lipschitz(&self) -> f64 {
        self.slope + self.curvature
    }
}

/// An immutable surrogate loss with its constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossSpec<T> {
    kind: LossKind<T>,
    junction: Option<(T, T, T)>,
    scale: T,
    lipschitz: T,
    smoothness: Option<T>,
    value_at_zero: T,
}

impl<T: Scalar> LossSpec<T> {
    pub fn logistic() -> Self {
        Self {
            kind: LossKind::Logistic,
            junction: None,
            scale: T::one(),
            lipschitz: T::one(),
            smoothness: Some(T::lit(0.25)),
            value_at_zero: T::LN_2(),
        }
    }

    pub fn hinge() -> Self {
        Self {
            kind: LossKind::Hinge,
            junction: None,
            scale: T::one(),
            lipschitz: T::one(),
            smoothness: None,
            value_at_zero: T::one(),
        }
    }

    pub fn poly_tail(p: T, c0: T) -> Result<Self> {
        let (pf, c0f) = (p.to_f64_lossy(), c0.to_f64_lossy());
        if !(pf > 0.0 && pf.is_finite() && c0f > 0.0 && c0f.is_finite()) {
            return invalid(format!("poly tail needs p > 0 and c0 > 0, got p={pf}, c0={c0f}"));
        }
        let junction = Junction { v1: c0f, slope: pf * c0f, curvature: pf * (pf + 1.0) * c0f };
        // tail'' = p(p+1) c0 z^(-p-2) is largest at the junction
        Ok(Self::from_junction(LossKind::PolyTail { p, c0 }, junction, junction.curvature))
    }

    pub fn exp_tail(p: T, c0: T, c1: T) -> Result<Self> {
        let (pf, c0f, c1f) = (p.to_f64_lossy(), c0.to_f64_lossy(), c1.to_f64_lossy());
        if !(pf > 0.0 && c0f > 0.0 && c1f > 0.0 && pf.is_finite() && c0f.is_finite() && c1f.is_finite()) {
            return invalid(format!("exp tail needs p, c0, c1 > 0, got p={pf}, c0={c0f}, c1={c1f}"));
        }
        // tail'' >= 0 on [1, inf) iff c1 p z^p >= p - 1 there, tightest at z = 1.
        if pf > 1.0 && c1f * pf < pf - 1.0 {
            return invalid(format!("exp tail with p={pf}, c1={c1f} is not convex at z=1 (need c1*p >= p-1)"));
        }
        let e1 = (-c1f).exp();
        let junction = Junction {
            v1: c0f * e1,
            slope: c0f * c1f * pf * e1,
            curvature: c0f * e1 * (c1f * c1f * pf * pf - c1f * pf * (pf - 1.0)),
        };
        let tail_curv = sup_exp_tail_curvature(pf, c0f, c1f);
        Ok(Self::from_junction(LossKind::ExpTail { p, c0, c1 }, junction, tail_curv.max(junction.curvature)))
    }

    fn from_junction(kind: LossKind<T>, j: Junction, raw_smoothness: f64) -> Self {
        let raw_zero = j.value_at_zero();
        let scale = if raw_zero > 1.0 { 1.0 / raw_zero } else { 1.0 };
        Self {
            kind,
            junction: Some((T::lit(j.v1), T::lit(j.slope), T::lit(j.curvature))),
            scale: T::lit(scale),
            lipschitz: T::lit(scale * j.lipschitz()),
            smoothness: Some(T::lit(scale * raw_smoothness)),
            value_at_zero: T::lit(scale * raw_zero),
        }
    }

    pub fn kind(&self) -> LossKind<T> {
        self.kind
    }

    pub fn is_smooth(&self) -> bool {
        self.smoothness.is_some()
    }

    /// True when `l(z) > 0` for every finite `z`.
    pub fn is_strictly_positive(&self) -> bool {
        !matches!(self.kind, LossKind::Hinge)
    }

    /// Checked evaluation.
    pub fn eval(&self, z: T) -> Result<T> {
        if !z.is_finite() {
            return domain(format!("loss evaluated at non-finite margin {z}"));
        }
        Ok(self.value(z))
    }

    /// Checked derivative. The hinge uses subgradient `0` at its kink.
    pub fn grad(&self, z: T) -> Result<T> {
        if !z.is_finite() {
            return domain(format!("loss derivative at non-finite margin {z}"));
        }
        Ok(self.derivative(z))
    }

    pub fn constants(&self) -> LossConstants<T> {
        let tail = match self.kind {
            LossKind::Logistic => TailDescriptor::Exponential { p: T::one(), c0: T::one(), c1: T::one() },
            LossKind::Hinge => TailDescriptor::ZeroBeyond { from: T::one() },
            LossKind::PolyTail { p, c0 } => TailDescriptor::Polynomial { p, c0: c0 * self.scale },
            LossKind::ExpTail { p, c0, c1 } => TailDescriptor::Exponential { p, c0: c0 * self.scale, c1 },
        };
        LossConstants {
            lipschitz: self.lipschitz,
            smoothness: self.smoothness,
            value_at_zero: self.value_at_zero,
            tail,
            scale: self.scale,
        }
    }

    /// Generalized inverse `inf { z : l(z) <= t }` by bracketing and bisection.
    pub fn inverse(&self, t: T) -> Result<Inverse<T>> {
        if t.is_nan() || t < T::zero() {
            return domain(format!("inverse level must be >= 0, got {t}"));
        }
        if t == T::zero() && self.is_strictly_positive() {
            return Ok(Inverse::Infinite);
        }
        if let LossKind::Hinge = self.kind {
            return Ok(Inverse::Finite(T::one() - t));
        }
        let two = T::lit(2.0);
        let mut hi = T::one();
        let mut doublings = 0;
        while self.value(hi) > t {
            hi = hi * two;
            doublings += 1;
            if doublings > 2000 || !hi.is_finite() {
                return Ok(Inverse::Infinite);
            }
        }
        let mut lo = T::zero();
        let mut steps = 0;
        while self.value(lo) <= t {
            lo = if lo == T::zero() { -T::one() } else { lo * two };
            steps += 1;
            if steps > 2000 || !lo.is_finite() {
                return domain(format!("level {t} lies above the whole range of the loss"));
            }
        }
        for _ in 0..200 {
            let mid = lo + (hi - lo) / two;
            if mid <= lo || mid >= hi {
                break;
            }
            if self.value(mid) <= t {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(Inverse::Finite(hi))
    }

    /// String id as accepted by [`FromStr`].
    pub fn id(&self) -> String {
        match self.kind {
            LossKind::Logistic => "logistic".into(),
            LossKind::Hinge => "hinge".into(),
            LossKind::PolyTail { p, c0 } => format!("poly:p={p},c0={c0}"),
            LossKind::ExpTail { p, c0, c1 } => format!("exp:p={p},c0={c0},c1={c1}"),
        }
    }

    #[inline]
    fn junction_value(&self, z: T) -> T {
        let (v1, s, k) = self.junction.expect("tail kinds carry a junction");
        let half = T::lit(0.5);
        if z >= T::zero() {
            let u = z - T::one();
            v1 - s * u + half * k * u * u
        } else {
            (v1 + s + half * k) - (s + k) * z
        }
    }

    #[inline]
    fn junction_slope(&self, z: T) -> T {
        let (_, s, k) = self.junction.expect("tail kinds carry a junction");
        if z >= T::zero() {
            -s + k * (z - T::one())
        } else {
            -(s + k)
        }
    }
}

impl<T: Scalar> SurrogateLoss<T> for LossSpec<T> {
    #[inline]
    fn value(&self, z: T) -> T {
        match self.kind {
            LossKind::Logistic => {
                let e = (-z.abs()).exp();
                (-z).max(T::zero()) + e.ln_1p()
            }
            LossKind::Hinge => (T::one() - z).max(T::zero()),
            LossKind::PolyTail { p, c0 } => {
                let raw = if z >= T::one() { c0 * z.powf(-p) } else { self.junction_value(z) };
                self.scale * raw
            }
            LossKind::ExpTail { p, c0, c1 } => {
                let raw = if z >= T::one() { c0 * (-c1 * z.powf(p)).exp() } else { self.junction_value(z) };
                self.scale * raw
            }
        }
    }

    #[inline]
    fn derivative(&self, z: T) -> T {
        match self.kind {
            LossKind::Logistic => {
                let e = (-z.abs()).exp();
                if z >= T::zero() {
                    -e / (T::one() + e)
                } else {
                    -T::one() / (T::one() + e)
                }
            }
            LossKind::Hinge => {
                if z < T::one() {
                    -T::one()
                } else {
                    T::zero()
                }
            }
            LossKind::PolyTail { p, c0 } => {
                let raw = if z >= T::one() { -p * c0 * z.powf(-p - T::one()) } else { self.junction_slope(z) };
                self.scale * raw
            }
            LossKind::ExpTail { p, c0, c1 } => {
                let raw = if z >= T::one() {
                    let zp = z.powf(p);
                    -c0 * c1 * p * zp / z * (-c1 * zp).exp()
                } else {
                    self.junction_slope(z)
                };
                self.scale * raw
            }
        }
    }

    fn lipschitz(&self) -> T {
        self.lipschitz
    }

    fn smoothness(&self) -> Option<T> {
        self.smoothness
    }

    fn value_at_zero(&self) -> T {
        self.value_at_zero
    }

    #[inline]
    fn value_and_derivative(&self, z: T) -> (T, T) {
        match self.kind {
            LossKind::Logistic => {
                let e = (-z.abs()).exp();
                let v = (-z).max(T::zero()) + e.ln_1p();
                let d = if z >= T::zero() { -e / (T::one() + e) } else { -T::one() / (T::one() + e) };
                (v, d)
            }
            _ => (self.value(z), self.derivative(z)),
        }
    }
}

/// `sup_{z >= 1} tail''(z)` for `c0 exp(-c1 z^p)`, located by a log-spaced scan
/// and refined by golden-section search.
fn sup_exp_tail_curvature(p: f64, c0: f64, c1: f64) -> f64 {
    let curv = |z: f64| {
        let zp = z.powf(p);
        c0 * (-c1 * zp).exp() * ((c1 * p) * (c1 * p) * zp * zp / (z * z) - c1 * p * (p - 1.0) * zp / (z * z))
    };
    if p <= 1.0 {
        // both terms of the bracket and the exponential decrease on [1, inf)
        return curv(1.0);
    }
    // beyond z_max the exponential factor is below 1e-300
    let z_max = (700.0 / c1).powf(1.0 / p).max(2.0);
    let steps = 20_000;
    let ratio = (z_max.ln()) / steps as f64;
    let (mut best_z, mut best) = (1.0, curv(1.0));
    for i in 1..=steps {
        let z = (ratio * i as f64).exp();
        let c = curv(z);
        if c > best {
            best = c;
            best_z = z;
        }
    }
    let (mut a, mut b) = ((best_z * (-ratio).exp()).max(1.0), best_z * ratio.exp());
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..200 {
        let x1 = b - g * (b - a);
        let x2 = a + g * (b - a);
        if curv(x1) < curv(x2) {
            a = x1;
        } else {
            b = x2;
        }
    }
    best.max(curv(0.5 * (a + b)))
}

impl<T: Scalar> fmt::Display for LossSpec<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id())
    }
}

impl<T: Scalar> FromStr for LossSpec<T> {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (head, rest) = s.split_once(':').unwrap_or((s, ""));
        let mut params: Vec<(String, f64)> = Vec::new();
        for part in rest.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| LabError::Usage(format!("loss parameter `{part}` is not key=value")))?;
            let v: f64 =
                v.trim().parse().map_err(|_| LabError::Usage(format!("loss parameter `{part}` is not numeric")))?;
            params.push((k.trim().to_ascii_lowercase(), v));
        }
        let get = |key: &str, default: Option<f64>| -> Result<T> {
            params
                .iter()
                .find(|(k, _)| k == key)
                .map(|(_, v)| *v)
                .or(default)
                .map(T::lit)
                .ok_or_else(|| LabError::Usage(format!("loss `{s}` is missing `{key}`")))
        };
        let check_keys = |allowed: &[&str]| -> Result<()> {
            match params.iter().find(|(k, _)| !allowed.contains(&k.as_str())) {
                Some((k, _)) => usage(format!("unknown parameter `{k}` for loss `{head}`")),
                None => Ok(()),
            }
        };
        match head.to_ascii_lowercase().as_str() {
            "logistic" => {
                check_keys(&[])?;
                Ok(Self::logistic())
            }
            "hinge" => {
                check_keys(&[])?;
                Ok(Self::hinge())
            }
            "poly" | "poly_tail" => {
                check_keys(&["p", "c0"])?;
                Self::poly_tail(get("p", None)?, get("c0", Some(1.0))?)
            }
            "exp" | "exp_tail" => {
                check_keys(&["p", "c0", "c1"])?;
                Self::exp_tail(get("p", Some(1.0))?, get("c0", Some(1.0))?, get("c1", Some(1.0))?)
            }
            other => usage(format!(
                "unknown loss `{other}` (expected logistic, hinge, poly:p=..,c0=.., exp:p=..,c0=..,c1=..)"
            )),
        }
    }
}

impl<T: Scalar> Serialize for LossSpec<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.id())
    }
}

impl<'de, T: Scalar> Deserialize<'de> for LossSpec<T> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

// ---------------------------------------------------------------------------
// Axiom validation

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Axiom {
    /// `l(z) >= 0` everywhere and `l(z) >= l(0)` for `z < 0`, i.e. `l / l(0)`
    /// dominates the zero-one loss.
    ZeroOneDominance,
    Monotone,
    Lipschitz,
    Smoothness,
    Convexity,
    SelfBounding,
}

impl Axiom {
    pub const ALL: [Axiom; 6] = [
        Axiom::ZeroOneDominance,
        Axiom::Monotone,
        Axiom::Lipschitz,
        Axiom::Smoothness,
        Axiom::Convexity,
        Axiom::SelfBounding,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxiomCheck {
    pub axiom: Axiom,
    pub outcome: Outcome,
    /// Smallest slack seen (negative on failure).
    pub worst_slack: f64,
    /// Grid point attaining the worst slack.
    pub worst_point: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<AxiomCheck>,
    pub grid_points: usize,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.outcome != Outcome::Fail)
    }

    pub fn check(&self, axiom: Axiom) -> &AxiomCheck {
        self.checks.iter().find(|c| c.axiom == axiom).expect("every axiom is reported")
    }
}

struct Tracker {
    axiom: Axiom,
    worst: f64,
    at: Option<f64>,
}

impl Tracker {
    fn new(axiom: Axiom) -> Self {
        Self { axiom, worst: f64::INFINITY, at: None }
    }

    fn see(&mut self, slack: f64, z: f64) {
        if slack < self.worst || self.at.is_none() {
            self.worst = slack;
            self.at = Some(z);
        }
    }

    fn finish(self) -> AxiomCheck {
        AxiomCheck {
            axiom: self.axiom,
            outcome: if self.worst < 0.0 { Outcome::Fail } else { Outcome::Pass },
            worst_slack: self.worst,
            worst_point: self.at,
        }
    }
}

/// Evenly spaced grid of `points` values on `[lo, hi]`.
pub fn uniform_grid<T: Scalar>(lo: T, hi: T, points: usize) -> Vec<T> {
    if points == 1 {
        return vec![lo];
    }
    let step = (hi - lo) / T::from_count(points - 1);
    (0..points).map(|i| lo + step * T::from_count(i)).collect()
}

/// Checks the loss axioms at every grid point and between adjacent points.
pub fn validate_loss<T: Scalar, L: SurrogateLoss<T> + ?Sized>(loss: &L, grid: &[T]) -> Result<ValidationReport> {
    if grid.is_empty() {
        return usage("validate_loss needs a non-empty grid");
    }
    let mut grid: Vec<T> = grid.to_vec();
    grid.sort_by(|a, b| a.partial_cmp(b).expect("finite grid"));
    grid.dedup();
    let rel = T::lit(1e-12).max(T::epsilon() * T::lit(64.0)).to_f64_lossy();
    let lip = loss.lipschitz().to_f64_lossy();
    let smooth = loss.smoothness().map(|h| h.to_f64_lossy());
    let zero = loss.value_at_zero().to_f64_lossy();

    let vals: Vec<(f64, f64, f64)> = grid
        .iter()
        .map(|&z| {
            let (v, d) = loss.value_and_derivative(z);
            (z.to_f64_lossy(), v.to_f64_lossy(), d.to_f64_lossy())
        })
        .collect();

    let mut dom = Tracker::new(Axiom::ZeroOneDominance);
    let mut mono = Tracker::new(Axiom::Monotone);
    let mut lipt = Tracker::new(Axiom::Lipschitz);
    let mut smt = Tracker::new(Axiom::Smoothness);
    let mut conv = Tracker::new(Axiom::Convexity);
    let mut selfb = Tracker::new(Axiom::SelfBounding);

    for &(z, v, d) in &vals {
        let scale = v.abs().max(1.0);
        let floor = if z < 0.0 { zero } else { 0.0 };
        dom.see(v - floor + rel * scale, z);
        mono.see(-d + rel * d.abs().max(1.0), z);
        lipt.see(lip * (1.0 + rel) - d.abs(), z);
        if let Some(h) = smooth {
            // a non-negative H-smooth function satisfies [l']^2 <= 4 H l
            selfb.see(4.0 * h * v * (1.0 + 1e-9) + rel * rel - d * d, z);
        }
    }
    for w in vals.windows(2) {
        let ((za, va, da), (zb, vb, db)) = (w[0], w[1]);
        mono.see(va - vb + rel * va.abs().max(1.0), zb);
        if let Some(h) = smooth {
            let lhs = (da - db).abs();
            smt.see(h * (zb - za) * (1.0 + 1e-6) + rel * da.abs().max(1.0) - lhs, za);
        }
        let mid = T::lit(0.5) * (grid_at(&grid, za) + grid_at(&grid, zb));
        let vm = loss.value(mid).to_f64_lossy();
        let avg = 0.5 * (va + vb);
        conv.see(avg - vm + rel * avg.abs().max(1.0), mid.to_f64_lossy());
    }

    let mut checks = vec![dom.finish(), mono.finish(), lipt.finish()];
    if smooth.is_some() {
        checks.push(smt.finish());
    } else {
        checks.push(skipped(Axiom::Smoothness));
    }
    checks.push(conv.finish());
    if smooth.is_some() {
        checks.push(selfb.finish());
    } else {
        checks.push(skipped(Axiom::SelfBounding));
    }
    Ok(ValidationReport { checks, grid_points: grid.len() })
}

fn grid_at<T: Scalar>(grid: &[T], z: f64) -> T {
    // grid values were converted losslessly, so search by equality
    *grid.iter().find(|g| g.to_f64_lossy() == z).expect("grid point present")
}

fn skipped(axiom: Axiom) -> AxiomCheck {
    AxiomCheck { axiom, outcome: Outcome::Skipped, worst_slack: f64::INFINITY, worst_point: None }
}
