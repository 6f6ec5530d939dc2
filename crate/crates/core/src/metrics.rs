//! Error rates, surrogate risks and distributional estimators.

use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{invalid, usage, LabError, Result};
use crate::loss::SurrogateLoss;
use crate::rng::{purpose_rng, Purpose};
use crate::scalar::{binomial_half_width, dot, norm, sgn, CompensatedSum, Scalar};
use crate::synthdata::{Dataset, SoftMarginForm};

/// Minimum sample size accepted by the projection estimators.
pub const MIN_ESTIMATOR_POINTS: usize = 10_000;

/// Quantile levels at which the sub-exponential fit is evaluated.
pub const SUBEXP_QUANTILES: [f64; 9] = [0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 0.99, 0.995, 0.999];

fn check_dim<T>(w: &[T], d: usize) -> Result<()> {
    if w.len() != d {
        return Err(LabError::DimensionMismatch { expected: d, got: w.len() });
    }
    Ok(())
}

/// Fraction of samples with `sgn(w.x) != y`.
pub fn zero_one_error<T: Scalar>(w: &[T], ds: &Dataset<T>) -> Result<T> {
    check_dim(w, ds.d())?;
    if w.iter().all(|v| *v == T::zero()) {
        log::warn!("zero weight vector: every prediction is +1");
    }
    let wrong = ds.rows().filter(|(x, y)| sgn(dot(w, x)) != *y).count();
    Ok(T::from_count(wrong) / T::from_count(ds.len()))
}

/// Empirical surrogate risk `(1/n) sum l(y w.x)`.
pub fn surrogate_risk<T: Scalar, L: SurrogateLoss<T> + ?Sized>(w: &[T], ds: &Dataset<T>, loss: &L) -> Result<T> {
    check_dim(w, ds.d())?;
    let total: CompensatedSum<T> = ds.rows().map(|(x, y)| loss.value(signed(dot(w, x), y))).collect();
    let risk = total.total() / T::from_count(ds.len());
    if !risk.is_finite() {
        return Err(LabError::Domain(format!("surrogate risk is not finite ({risk})")));
    }
    Ok(risk)
}

#[inline]
pub(crate) fn signed<T: Scalar>(m: T, y: i8) -> T {
    if y > 0 {
        m
    } else {
        -m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RiskReport<T> {
    pub zero_one: T,
    pub surrogate: T,
    /// `surrogate / l(0)`, an upper bound on `zero_one` on the same sample.
    pub markov_bound: T,
    pub n: usize,
    /// 3-sigma binomial half-width of `zero_one`.
    pub half_width: T,
}

pub fn risk_report<T: Scalar, L: SurrogateLoss<T> + ?Sized>(
    w: &[T],
    ds: &Dataset<T>,
    loss: &L,
) -> Result<RiskReport<T>> {
    let zero_one = zero_one_error(w, ds)?;
    let surrogate = surrogate_risk(w, ds, loss)?;
    Ok(RiskReport {
        zero_one,
        surrogate,
        markov_bound: surrogate / loss.value_at_zero(),
        n: ds.len(),
        half_width: binomial_half_width(zero_one, ds.len()),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SoftMarginCurve<T> {
    pub gammas: Vec<T>,
    pub phi_hat: Vec<T>,
    pub phi_bound: Option<Vec<T>>,
    pub n: usize,
}

impl<T: Scalar> SoftMarginCurve<T> {
    /// Attaches analytic values for the grid; points where the form gives no
    /// bound are reported as 1.
    pub fn with_bound(mut self, form: &SoftMarginForm<T>) -> Self {
        self.phi_bound = Some(self.gammas.iter().map(|&g| form.bound(g).unwrap_or(T::one())).collect());
        self
    }

    pub fn half_widths(&self) -> Vec<T> {
        self.phi_hat.iter().map(|&p| binomial_half_width(p, self.n)).collect()
    }
}

/// Absolute projections `|u.x|` sorted ascending.
fn sorted_abs_projections<T: Scalar>(xs: &[T], d: usize, u: &[T]) -> Vec<T> {
    let mut proj: Vec<T> = xs.chunks_exact(d).map(|x| dot(u, x).abs()).collect();
    proj.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite projections"));
    proj
}

fn check_points<T: Scalar>(xs: &[T], d: usize) -> Result<usize> {
    if d == 0 || !xs.len().is_multiple_of(d) {
        return invalid(format!("{} values do not form rows of dimension {d}", xs.len()));
    }
    if xs.is_empty() {
        return usage("no points");
    }
    Ok(xs.len() / d)
}

/// `phi_hat[j]` = fraction of rows of `xs` (row-major, dimension `d`) with
/// `|v_bar . x| <= gammas[j]`.
pub fn soft_margin_curve<T: Scalar>(xs: &[T], d: usize, v_bar: &[T], gammas: &[T]) -> Result<SoftMarginCurve<T>> {
    let n = check_points(xs, d)?;
    check_dim(v_bar, d)?;
    let nv = norm(v_bar);
    if (nv - T::one()).abs() > T::lit(1e-9) {
        return invalid(format!("direction must have unit norm, got {nv}"));
    }
    if gammas.windows(2).any(|w| w[1] <= w[0]) || gammas.iter().any(|&g| g < T::zero() || g > T::one()) {
        return invalid("gamma grid must be strictly increasing inside [0, 1]");
    }
    let proj = sorted_abs_projections(xs, d, v_bar);
    let phi_hat = gammas.iter().map(|&g| T::from_count(proj.partition_point(|&p| p <= g)) / T::from_count(n)).collect();
    Ok(SoftMarginCurve { gammas: gammas.to_vec(), phi_hat, phi_bound: None, n })
}

/// Outcome of the anti-concentration estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "status", content = "value", rename_all = "snake_case")]
pub enum DensityEstimate<T> {
    Bounded(T),
    /// A projection looks atomic: the histogram density keeps growing as
    /// bins shrink.
    NoDensityBound,
}

impl<T: Scalar> DensityEstimate<T> {
    pub fn value(self) -> Option<T> {
        match self {
            DensityEstimate::Bounded(u) => Some(u),
            DensityEstimate::NoDensityBound => None,
        }
    }
}

/// `count` random unit directions, preceded by the normalized `planted` one when given.
pub fn random_directions<T: Scalar>(d: usize, count: usize, seed: u64, planted: Option<&[T]>) -> Result<Vec<Vec<T>>> {
    let mut rng = purpose_rng(seed, Purpose::Directions);
    let mut dirs = Vec::with_capacity(count + 1);
    if let Some(v) = planted {
        check_dim(v, d)?;
        let nv = norm(v);
        dirs.push(v.iter().map(|&c| c / nv).collect());
    }
    while dirs.len() < count + usize::from(planted.is_some()) {
        let g: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
        let n = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n > 0.0 {
            dirs.push(g.iter().map(|v| T::lit(v / n)).collect());
        }
    }
    Ok(dirs)
}

/// Largest histogram density of `values` (sorted) with bin width `h`.
fn max_bin_density(sorted: &[f64], h: f64) -> f64 {
    let lo = sorted[0];
    let mut best = 0usize;
    let mut start = 0usize;
    let mut current_bin = 0u64;
    for (i, &v) in sorted.iter().enumerate() {
        let bin = ((v - lo) / h).floor() as u64;
        if bin != current_bin {
            best = best.max(i - start);
            start = i;
            current_bin = bin;
        }
    }
    best = best.max(sorted.len() - start);
    best as f64 / (sorted.len() as f64 * h)
}

/// Empirical quantile `p` of sorted data (lower order statistic).
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let k = ((p * n as f64).ceil() as usize).clamp(1, n);
    sorted[k - 1]
}

/// Density estimate of one projection; `None` if the projection is atomic.
fn projection_density(mut proj: Vec<f64>) -> Option<f64> {
    proj.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite projections"));
    let n = proj.len() as f64;
    let iqr = quantile(&proj, 0.75) - quantile(&proj, 0.25);
    let h = 2.0 * iqr / n.cbrt();
    if !(h >= 1e-6) {
        return None;
    }
    let coarse = max_bin_density(&proj, h);
    let fine = max_bin_density(&proj, h / 16.0);
    if fine > 8.0 * coarse {
        return None;
    }
    Some(coarse)
}

/// Maximum projected density over `n_directions` random unit directions (and
/// `planted`, when given), each estimated by a Freedman–Diaconis histogram.
pub fn anti_concentration_u<T: Scalar>(
    xs: &[T],
    d: usize,
    n_directions: usize,
    seed: u64,
    planted: Option<&[T]>,
) -> Result<DensityEstimate<T>> {
    let n = check_points(xs, d)?;
    if n < MIN_ESTIMATOR_POINTS {
        return usage(format!("anti-concentration estimate needs at least {MIN_ESTIMATOR_POINTS} points, got {n}"));
    }
    let mut best = 0.0f64;
    for u in random_directions(d, n_directions, seed, planted)? {
        let proj: Vec<f64> = xs.chunks_exact(d).map(|x| dot(&u, x).to_f64_lossy()).collect();
        match projection_density(proj) {
            Some(p) => best = best.max(p),
            None => return Ok(DensityEstimate::NoDensityBound),
        }
    }
    Ok(DensityEstimate::Bounded(T::lit(best)))
}

/// Smallest `C` with empirical `P(|u.x| >= t) <= exp(-t / C)` at every grid
/// quantile `t`, maximized over directions.
pub fn subexp_norm<T: Scalar>(xs: &[T], d: usize, n_directions: usize, seed: u64, planted: Option<&[T]>) -> Result<T> {
    let n = check_points(xs, d)?;
    if n < MIN_ESTIMATOR_POINTS {
        return usage(format!("sub-exponential estimate needs at least {MIN_ESTIMATOR_POINTS} points, got {n}"));
    }
    let mut best = T::zero();
    for u in random_directions(d, n_directions, seed, planted)? {
        let proj = sorted_abs_projections(xs, d, &u);
        for &p in &SUBEXP_QUANTILES {
            let k = ((p * n as f64).ceil() as usize).clamp(1, n);
            let t = proj[k - 1];
            if t <= T::zero() {
                continue;
            }
            let at_least = n - proj.partition_point(|&v| v < t);
            let survival = at_least as f64 / n as f64;
            let c = t / T::lit(-survival.ln());
            if c > best {
                best = c;
            }
        }
    }
    Ok(best)
}

/// Per-term bounds for [`RiskDecomposition`], all exact on the sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecompositionBounds<T> {
    /// `(1 + L V B_X) * P(y v.x <= 0)`.
    pub wrong: T,
    /// Empirical soft margin at `gamma`.
    pub band: T,
    /// `l(V gamma)`.
    pub far: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RiskDecomposition<T> {
    pub term_wrong: T,
    pub term_band: T,
    pub term_far: T,
    pub total: T,
    /// Empirical zero-one error of the planted direction.
    pub opt_hat: T,
    pub bounds: DecompositionBounds<T>,
}

/// Splits `F(V v_bar)` over `{y v.x <= 0}`, `{0 < y v.x <= gamma}` and
/// `{y v.x > gamma}`.
pub fn risk_decomposition<T: Scalar, L: SurrogateLoss<T> + ?Sized>(
    ds: &Dataset<T>,
    loss: &L,
    v_bar: &[T],
    scale: T,
    gamma: T,
) -> Result<RiskDecomposition<T>> {
    check_dim(v_bar, ds.d())?;
    let nv = norm(v_bar);
    if (nv - T::one()).abs() > T::lit(1e-9) {
        return invalid(format!("direction must have unit norm, got {nv}"));
    }
    if !(scale > T::zero()) {
        return invalid(format!("scale V must be positive, got {scale}"));
    }
    if !(gamma > T::zero() && gamma <= T::one()) {
        return invalid(format!("gamma must lie in (0, 1], got {gamma}"));
    }
    let (mut wrong, mut band, mut far) = (T::zero(), T::zero(), T::zero());
    let (mut n_wrong, mut n_slab, mut n_err) = (0usize, 0usize, 0usize);
    for (x, y) in ds.rows() {
        let m = dot(v_bar, x);
        let ym = signed(m, y);
        let l = loss.value(scale * ym);
        if ym <= T::zero() {
            wrong = wrong + l;
            n_wrong += 1;
        } else if ym <= gamma {
            band = band + l;
        } else {
            far = far + l;
        }
        if m.abs() <= gamma {
            n_slab += 1;
        }
        if sgn(m) != y {
            n_err += 1;
        }
    }
    let n = T::from_count(ds.len());
    let lip = loss.lipschitz();
    let b_x = ds.max_norm();
    Ok(RiskDecomposition {
        term_wrong: wrong / n,
        term_band: band / n,
        term_far: far / n,
        total: (wrong + band + far) / n,
        opt_hat: T::from_count(n_err) / n,
        bounds: DecompositionBounds {
            wrong: (T::one() + lip * scale * b_x) * T::from_count(n_wrong) / n,
            band: T::from_count(n_slab) / n,
            far: loss.value(scale * gamma),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss::LossSpec;
    use crate::synthdata::{sample, DatasetMeta, DistributionSpec, NoiseModel};

    fn meta() -> DatasetMeta {
        DatasetMeta { seed: 0, spec_id: "manual".into(), flip_fraction: 0.0, max_norm: 0.0 }
    }

    #[test]
    fn zero_one_of_planted_and_flipped_direction() {
        let spec = DistributionSpec::<f64>::separable_sphere(4);
        let ds = sample(&spec, 2000, 1).unwrap();
        assert_eq!(zero_one_error(&spec.v_bar, &ds).unwrap(), 0.0);
        let neg: Vec<f64> = spec.v_bar.iter().map(|v| -v).collect();
        assert_eq!(zero_one_error(&neg, &ds).unwrap(), 1.0);
        assert!(matches!(zero_one_error(&[1.0], &ds), Err(LabError::DimensionMismatch { .. })));
    }

    #[test]
    fn surrogate_risk_closed_forms() {
        let ds = sample(&DistributionSpec::<f64>::gaussian(3), 500, 2).unwrap();
        let zero = vec![0.0; 3];
        let r = surrogate_risk(&zero, &ds, &LossSpec::logistic()).unwrap();
        assert!((r - std::f64::consts::LN_2).abs() <= 4.0 * f64::EPSILON, "{r}");
        assert_eq!(surrogate_risk(&zero, &ds, &LossSpec::hinge()).unwrap(), 1.0);
        let one: Dataset<f64> = Dataset::new(2, vec![1.0, 0.0], vec![1], meta()).unwrap();
        let r = surrogate_risk(&[3.0, 0.0], &one, &LossSpec::logistic()).unwrap();
        // ln(1 + e^-3)
        assert!((r - 0.048_587_351_573_742_06).abs() < 1e-12, "{r}");
    }

    #[test]
    fn markov_bound_dominates_error() {
        let spec = DistributionSpec::<f64>::gaussian(3).with_noise(NoiseModel::Rcn { eta: 0.2 });
        let ds = sample(&spec, 5000, 3).unwrap();
        for loss in [LossSpec::logistic(), LossSpec::hinge(), LossSpec::poly_tail(2.0, 1.0).unwrap()] {
            for w in [[0.3, -0.2, 0.1], [2.0, 0.0, 0.0], [0.0, 0.0, 0.0]] {
                let r = risk_report(&w, &ds, &loss).unwrap();
                assert!(r.zero_one <= r.markov_bound, "{loss} {r:?}");
            }
        }
    }

    #[test]
    fn soft_margin_on_hard_margin_points_vanishes_below_margin() {
        let spec = DistributionSpec::<f64>::hard_margin_sphere(5, 0.2);
        let ds = sample(&spec, 20_000, 4).unwrap();
        let c = soft_margin_curve(ds.features(), 5, &spec.v_bar, &[0.0, 0.1, 0.19, 0.5]).unwrap();
        assert_eq!(&c.phi_hat[..3], &[0.0, 0.0, 0.0]);
        assert!(c.phi_hat[3] > 0.0);
    }

    #[test]
    fn soft_margin_gaussian_matches_erf() {
        let spec = DistributionSpec::<f64>::gaussian(2);
        let ds = sample(&spec, 1_000_000, 5).unwrap();
        let c = soft_margin_curve(ds.features(), 2, &spec.v_bar, &[0.1]).unwrap();
        // erf(0.1 / sqrt 2)
        assert!((c.phi_hat[0] - 0.079_655_674_554_057_96).abs() < 0.003);
    }

    #[test]
    fn soft_margin_rejects_bad_inputs() {
        let xs = vec![0.0; 10];
        assert!(soft_margin_curve(&xs, 2, &[1.0, 1.0], &[0.1]).is_err());
        assert!(soft_margin_curve(&xs, 2, &[1.0, 0.0], &[0.2, 0.1]).is_err());
    }

    #[test]
    fn estimators_need_enough_points() {
        let xs = vec![0.5; 200];
        assert!(matches!(anti_concentration_u(&xs, 2, 5, 0, None), Err(LabError::Usage(_))));
        assert!(matches!(subexp_norm(&xs, 2, 5, 0, None), Err(LabError::Usage(_))));
    }

    #[test]
    fn atoms_have_no_density_bound() {
        let xs: Vec<f64> = (0..20_000).flat_map(|i| if i % 2 == 0 { [1.0, 0.0] } else { [-1.0, 0.0] }).collect();
        assert_eq!(anti_concentration_u(&xs, 2, 10, 1, None).unwrap(), DensityEstimate::NoDensityBound);
    }

    #[test]
    fn subexp_scaling_doubles_exactly() {
        let ds = sample(&DistributionSpec::<f64>::gaussian(3), 20_000, 6).unwrap();
        let c1 = subexp_norm(ds.features(), 3, 10, 9, None).unwrap();
        let doubled: Vec<f64> = ds.features().iter().map(|v| 2.0 * v).collect();
        let c2 = subexp_norm(&doubled, 3, 10, 9, None).unwrap();
        assert_eq!(c2, 2.0 * c1);
    }

    #[test]
    fn decomposition_partitions_the_risk() {
        let spec = DistributionSpec::<f64>::gaussian(4).with_noise(NoiseModel::Rcn { eta: 0.1 });
        let ds = sample(&spec, 5000, 7).unwrap();
        let loss = LossSpec::logistic();
        let dec = risk_decomposition(&ds, &loss, &spec.v_bar, 3.0, 0.2).unwrap();
        let w: Vec<f64> = spec.v_bar.iter().map(|v| 3.0 * v).collect();
        let f = surrogate_risk(&w, &ds, &loss).unwrap();
        assert!((dec.term_wrong + dec.term_band + dec.term_far - f).abs() < 1e-12);
        assert!(dec.term_far <= dec.bounds.far);
        assert!(dec.term_band <= dec.bounds.band);
        assert!(dec.term_wrong <= dec.bounds.wrong);
    }

    #[test]
    fn decomposition_on_separable_data_below_margin() {
        let spec = DistributionSpec::<f64>::hard_margin_sphere(3, 0.3);
        let ds = sample(&spec, 3000, 8).unwrap();
        let dec = risk_decomposition(&ds, &LossSpec::logistic(), &spec.v_bar, 5.0, 0.25).unwrap();
        assert_eq!(dec.term_wrong, 0.0);
        assert_eq!(dec.term_band, 0.0);
    }
}
