//! Synthetic labeled data with a planted unit direction.
//!
//! Labels are `sgn(v_bar . x)` computed in the dataset's scalar type, then
//! optionally corrupted by a noise model. Features and flips come from
//! separate counter-based streams, so a streamed sample `t` (as consumed by
//! online SGD) equals row `t` of a dataset drawn with the same seed.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF};

use crate::error::{invalid, usage, LabError, Result};
use crate::rng::{block_rng, Purpose, BLOCK};
use crate::scalar::{dot, norm, sgn, Scalar};

/// Acceptance probability below which the hard-margin sampler switches from
/// rejection to the component-wise construction.
const MIN_ACCEPTANCE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// Uniform on the sphere of radius `B_X`, conditioned on `|v.x| >= gamma* B_X`.
    HardMarginSphere,
    /// Uniform on the sphere of radius `B_X`.
    SeparableSphere,
    /// Standard normal; `B_X` is the root-mean-square norm `sqrt(d)`.
    Gaussian,
    /// Uniform on the ball of radius `sqrt(d + 2)` (identity covariance).
    UniformBallIsotropic,
    /// Standard normal conditioned on `|x| <= B_X`.
    TruncatedGaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum NoiseModel<T> {
    None,
    /// Each label flipped independently with probability `eta`.
    Rcn {
        eta: T,
    },
    /// Flip the `budget` fraction of points closest to the planted boundary,
    /// restricted to `|v.x| <= band`.
    BoundaryAdv {
        band: T,
        budget: T,
    },
}

impl<T: Scalar> NoiseModel<T> {
    pub fn validate(&self) -> Result<()> {
        let half = T::lit(0.5);
        match *self {
            NoiseModel::None => Ok(()),
            NoiseModel::Rcn { eta } => {
                if !(eta >= T::zero() && eta < half) {
                    return invalid(format!("rcn rate must lie in [0, 1/2), got {eta}"));
                }
                Ok(())
            }
            NoiseModel::BoundaryAdv { band, budget } => {
                if !(budget >= T::zero() && budget < half) {
                    return invalid(format!("boundary budget must lie in [0, 1/2), got {budget}"));
                }
                if !(band > T::zero() && band.is_finite()) {
                    return invalid(format!("boundary band must be positive, got {band}"));
                }
                Ok(())
            }
        }
    }
}

/// Soft-margin function known in closed form for a family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum SoftMarginForm<T> {
    /// `phi(gamma) = 0` for `gamma < gamma_star` (unit-sphere scale).
    HardMargin { gamma_star: T },
    /// `phi(gamma) <= slope * gamma`.
    Linear { slope: T },
}

impl<T: Scalar> SoftMarginForm<T> {
    /// Upper bound on `phi(gamma)` in the data's own units, clipped to `[0, 1]`.
    pub fn bound(&self, gamma: T) -> Option<T> {
        match *self {
            SoftMarginForm::HardMargin { gamma_star } => (gamma < gamma_star).then(T::zero),
            SoftMarginForm::Linear { slope } => Some((slope * gamma).min(T::one())),
        }
    }
}

/// Analytic constants of a family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnalyticConstants<T> {
    pub soft_margin: Option<SoftMarginForm<T>>,
    /// Maximum density of a one-dimensional projection.
    pub anti_concentration: Option<T>,
    /// Sub-exponential norm of projections.
    pub subexp_norm: Option<T>,
    /// Set when the constants are those of the untruncated parent family.
    pub approximate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionSpec<T> {
    pub family: Family,
    pub d: usize,
    pub v_bar: Vec<T>,
    /// Hard margin on the unit-sphere scale (hard_margin_sphere only).
    pub gamma_star: Option<T>,
    pub b_x: T,
    pub noise: NoiseModel<T>,
}

fn unit_e1<T: Scalar>(d: usize) -> Vec<T> {
    let mut v = vec![T::zero(); d];
    if d > 0 {
        v[0] = T::one();
    }
    v
}

impl<T: Scalar> DistributionSpec<T> {
    fn base(family: Family, d: usize, b_x: T) -> Self {
        Self { family, d, v_bar: unit_e1(d), gamma_star: None, b_x, noise: NoiseModel::None }
    }

    pub fn hard_margin_sphere(d: usize, gamma_star: T) -> Self {
        Self { gamma_star: Some(gamma_star), ..Self::base(Family::HardMarginSphere, d, T::one()) }
    }

    pub fn separable_sphere(d: usize) -> Self {
        Self::base(Family::SeparableSphere, d, T::one())
    }

    pub fn gaussian(d: usize) -> Self {
        Self::base(Family::Gaussian, d, T::from_count(d).sqrt())
    }

    pub fn uniform_ball_isotropic(d: usize) -> Self {
        Self::base(Family::UniformBallIsotropic, d, T::from_count(d + 2).sqrt())
    }

    pub fn truncated_gaussian(d: usize) -> Self {
        Self::base(Family::TruncatedGaussian, d, T::lit(2.0) * T::from_count(d).sqrt())
    }

    pub fn with_noise(mut self, noise: NoiseModel<T>) -> Self {
        self.noise = noise;
        self
    }

    pub fn with_b_x(mut self, b_x: T) -> Self {
        self.b_x = b_x;
        self
    }

    pub fn with_v_bar(mut self, v_bar: Vec<T>) -> Self {
        self.v_bar = v_bar;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return invalid("dimension must be at least 1");
        }
        if self.v_bar.len() != self.d {
            return Err(LabError::DimensionMismatch { expected: self.d, got: self.v_bar.len() });
        }
        let nv = norm(&self.v_bar);
        if (nv - T::one()).abs() > T::unit_tolerance() {
            return invalid(format!("planted direction must have unit norm, got {nv}"));
        }
        if !(self.b_x > T::zero() && self.b_x.is_finite()) {
            return invalid(format!("B_X must be positive, got {}", self.b_x));
        }
        match (self.family, self.gamma_star) {
            (Family::HardMarginSphere, Some(g)) if g > T::zero() && g <= T::one() => {}
            (Family::HardMarginSphere, g) => {
                return invalid(format!("hard margin must lie in (0, 1], got {g:?}"));
            }
            (_, Some(_)) => return invalid("only hard_margin_sphere takes a margin"),
            _ => {}
        }
        if self.family == Family::UniformBallIsotropic {
            let r = T::from_count(self.d + 2).sqrt();
            if (self.b_x - r).abs() > T::unit_tolerance() * r {
                return invalid("uniform_ball_isotropic needs radius sqrt(d+2) for identity covariance");
            }
        }
        self.noise.validate()
    }

    /// Short identifier recorded in dataset metadata.
    pub fn id(&self) -> String {
        let fam = match self.family {
            Family::HardMarginSphere => "hard_margin_sphere",
            Family::SeparableSphere => "separable_sphere",
            Family::Gaussian => "gaussian",
            Family::UniformBallIsotropic => "uniform_ball_isotropic",
            Family::TruncatedGaussian => "truncated_gaussian",
        };
        let mut s = format!("{fam}(d={},B_X={}", self.d, self.b_x);
        if let Some(g) = self.gamma_star {
            s.push_str(&format!(",gamma*={g}"));
        }
        s.push(')');
        match self.noise {
            NoiseModel::None => {}
            NoiseModel::Rcn { eta } => s.push_str(&format!("+rcn({eta})")),
            NoiseModel::BoundaryAdv { band, budget } => {
                s.push_str(&format!("+boundary_adv(band={band},budget={budget})"))
            }
        }
        s
    }

    pub fn analytic(&self) -> AnalyticConstants<T> {
        let d = self.d as f64;
        let b = self.b_x.to_f64_lossy();
        let gauss_u = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
        let (soft, u, approximate) = match self.family {
            Family::HardMarginSphere => {
                (self.gamma_star.map(|g| SoftMarginForm::HardMargin { gamma_star: g * self.b_x }), None, false)
            }
            Family::SeparableSphere => {
                // projection density  Gamma(d/2) / (sqrt(pi) Gamma((d-1)/2)) (1 - z^2/B^2)^((d-3)/2) / B
                let u = (self.d >= 3)
                    .then(|| (ln_gamma(d / 2.0) - ln_gamma((d - 1.0) / 2.0)).exp() / std::f64::consts::PI.sqrt() / b);
                (u.map(|u| SoftMarginForm::Linear { slope: T::lit(2.0 * u) }), u, false)
            }
            Family::Gaussian => (Some(SoftMarginForm::Linear { slope: T::lit(2.0) }), Some(gauss_u), false),
            Family::UniformBallIsotropic => {
                let u = (ln_gamma(d / 2.0 + 1.0) - ln_gamma((d + 1.0) / 2.0)).exp() / std::f64::consts::PI.sqrt() / b;
                (Some(SoftMarginForm::Linear { slope: T::lit(2.0) }), Some(u), false)
            }
            Family::TruncatedGaussian => (Some(SoftMarginForm::Linear { slope: T::lit(2.0) }), Some(gauss_u), true),
        };
        // symmetric log-concave projections: -ln P(|Z| >= t) is convex and
        // vanishes at 0, so the worst ratio t / -ln S(t) is attained as t -> 0
        let c_m = match self.family {
            Family::Gaussian | Family::UniformBallIsotropic | Family::TruncatedGaussian => {
                u.map(|u| T::lit(1.0 / (2.0 * u)))
            }
            _ => None,
        };
        AnalyticConstants { soft_margin: soft, anti_concentration: u.map(T::lit), subexp_norm: c_m, approximate }
    }

    /// Probability that a uniform sphere point passes the hard-margin test.
    pub fn margin_acceptance(&self) -> f64 {
        match (self.family, self.gamma_star) {
            (Family::HardMarginSphere, Some(g)) if self.d >= 2 => {
                let g2 = g.to_f64_lossy().powi(2);
                1.0 - statrs::function::beta::beta_reg(0.5, (self.d as f64 - 1.0) / 2.0, g2.min(1.0))
            }
            _ => 1.0,
        }
    }

    /// Streaming sampler for this spec.
    pub fn stream(&self, seed: u64) -> Result<SampleStream<T>> {
        self.validate()?;
        if let NoiseModel::BoundaryAdv { .. } = self.noise {
            return usage("boundary_adv depends on the whole sample and cannot be streamed");
        }
        let sampler = FeatureSampler::new(self)?;
        Ok(SampleStream {
            spec: self.clone(),
            sampler,
            seed,
            index: 0,
            features: block_rng(seed, Purpose::Features, 0),
            noise: block_rng(seed, Purpose::Noise, 0),
            scratch: vec![0.0; self.d],
        })
    }
}

fn ln_gamma(x: f64) -> f64 {
    statrs::function::gamma::ln_gamma(x)
}

/// What the planted direction achieves under a spec.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlantedOptimum<T> {
    pub v_bar: Vec<T>,
    pub opt: T,
    /// False when `opt` is only an upper bound (boundary adversary).
    pub opt_exact: bool,
    pub gamma_star: Option<T>,
    pub soft_margin: Option<SoftMarginForm<T>>,
}

pub fn planted_optimum<T: Scalar>(spec: &DistributionSpec<T>) -> Result<PlantedOptimum<T>> {
    spec.validate()?;
    let (opt, exact) = match spec.noise {
        NoiseModel::None => (T::zero(), true),
        NoiseModel::Rcn { eta } => (eta, true),
        NoiseModel::BoundaryAdv { budget, .. } => (budget, false),
    };
    Ok(PlantedOptimum {
        v_bar: spec.v_bar.clone(),
        opt,
        opt_exact: exact,
        gamma_star: spec.gamma_star,
        soft_margin: spec.analytic().soft_margin,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample<T> {
    pub x: Vec<T>,
    pub y: i8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub seed: u64,
    pub spec_id: String,
    pub flip_fraction: f64,
    pub max_norm: f64,
}

/// Labeled samples stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    d: usize,
    xs: Vec<T>,
    ys: Vec<i8>,
    pub meta: DatasetMeta,
}

impl<T: Scalar> Dataset<T> {
    /// Builds a dataset from row-major features. Metadata norm is recomputed.
    pub fn new(d: usize, xs: Vec<T>, ys: Vec<i8>, mut meta: DatasetMeta) -> Result<Self> {
        if d == 0 {
            return invalid("dimension must be at least 1");
        }
        if xs.len() != d * ys.len() {
            return Err(LabError::DimensionMismatch { expected: d * ys.len(), got: xs.len() });
        }
        if let Some(bad) = xs.iter().position(|v| !v.is_finite()) {
            return invalid(format!("non-finite coordinate in row {}", bad / d));
        }
        if let Some(bad) = ys.iter().position(|&y| y != 1 && y != -1) {
            return invalid(format!("label in row {bad} is not +-1"));
        }
        meta.max_norm = xs.chunks_exact(d).map(|r| norm(r).to_f64_lossy()).fold(0.0, f64::max);
        Ok(Self { d, xs, ys, meta })
    }

    pub fn from_samples(samples: Vec<LabeledSample<T>>, meta: DatasetMeta) -> Result<Self> {
        let d = samples.first().map(|s| s.x.len()).ok_or_else(|| LabError::Usage("no samples".into()))?;
        let mut xs = Vec::with_capacity(d * samples.len());
        let mut ys = Vec::with_capacity(samples.len());
        for s in samples {
            if s.x.len() != d {
                return Err(LabError::DimensionMismatch { expected: d, got: s.x.len() });
            }
            xs.extend(s.x);
            ys.push(s.y);
        }
        Self::new(d, xs, ys, meta)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.ys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ys.is_empty()
    }

    #[inline]
    pub fn x(&self, i: usize) -> &[T] {
        &self.xs[i * self.d..(i + 1) * self.d]
    }

    #[inline]
    pub fn y(&self, i: usize) -> i8 {
        self.ys[i]
    }

    pub fn features(&self) -> &[T] {
        &self.xs
    }

    pub fn labels(&self) -> &[i8] {
        &self.ys
    }

    pub fn rows(&self) -> impl Iterator<Item = (&[T], i8)> + '_ {
        self.xs.chunks_exact(self.d).zip(self.ys.iter().copied())
    }

    pub fn sample(&self, i: usize) -> LabeledSample<T> {
        LabeledSample { x: self.x(i).to_vec(), y: self.ys[i] }
    }

    /// Realized maximum feature norm.
    pub fn max_norm(&self) -> T {
        T::lit(self.meta.max_norm)
    }
}

/// Draws features for one family from `f64` randomness.
#[derive(Debug, Clone)]
struct FeatureSampler {
    family: Family,
    d: usize,
    b_x: f64,
    v_bar: Vec<f64>,
    /// Unit-scale margin threshold for hard-margin rejection.
    gamma_star: f64,
    /// `Some((F(gamma*^2), beta))` when the component-wise sampler is active.
    componentwise: Option<(f64, Beta)>,
}

impl FeatureSampler {
    fn new<T: Scalar>(spec: &DistributionSpec<T>) -> Result<Self> {
        let gamma_star = spec.gamma_star.map(|g| g.to_f64_lossy()).unwrap_or(0.0);
        let mut componentwise = None;
        if spec.family == Family::HardMarginSphere && spec.d >= 2 && spec.margin_acceptance() < MIN_ACCEPTANCE {
            let beta = Beta::new(0.5, (spec.d as f64 - 1.0) / 2.0)
                .map_err(|e| LabError::Validation(format!("beta law for margin sampling: {e}")))?;
            componentwise = Some((beta.cdf(gamma_star * gamma_star), beta));
        }
        Ok(Self {
            family: spec.family,
            d: spec.d,
            b_x: spec.b_x.to_f64_lossy(),
            v_bar: spec.v_bar.iter().map(|v| v.to_f64_lossy()).collect(),
            gamma_star,
            componentwise,
        })
    }

    fn normals(&self, rng: &mut ChaCha8Rng, out: &mut [f64]) {
        for o in out.iter_mut() {
            *o = StandardNormal.sample(rng);
        }
    }

    fn unit_direction(&self, rng: &mut ChaCha8Rng, out: &mut [f64]) {
        loop {
            self.normals(rng, out);
            let n = out.iter().map(|v| v * v).sum::<f64>().sqrt();
            if n > 0.0 {
                out.iter_mut().for_each(|v| *v /= n);
                return;
            }
        }
    }

    /// One feature vector in `T`, satisfying the family's constraints in `T`.
    fn draw<T: Scalar>(&self, rng: &mut ChaCha8Rng, scratch: &mut [f64], out: &mut [T], v_bar: &[T]) {
        loop {
            match self.family {
                Family::Gaussian => self.normals(rng, scratch),
                Family::SeparableSphere | Family::HardMarginSphere => {
                    if let Some((lo, beta)) = &self.componentwise {
                        self.componentwise_margin(rng, scratch, *lo, beta);
                    } else {
                        self.unit_direction(rng, scratch);
                        scratch.iter_mut().for_each(|v| *v *= self.b_x);
                    }
                }
                Family::UniformBallIsotropic => {
                    self.unit_direction(rng, scratch);
                    let u: f64 = rng.random();
                    let r = self.b_x * u.powf(1.0 / self.d as f64);
                    scratch.iter_mut().for_each(|v| *v *= r);
                }
                Family::TruncatedGaussian => loop {
                    self.normals(rng, scratch);
                    if scratch.iter().map(|v| v * v).sum::<f64>().sqrt() <= self.b_x {
                        break;
                    }
                },
            }
            for (o, s) in out.iter_mut().zip(scratch.iter()) {
                *o = T::lit(*s);
            }
            let ok = match self.family {
                Family::HardMarginSphere => dot(v_bar, out).abs() >= T::lit(self.gamma_star) * T::lit(self.b_x),
                Family::TruncatedGaussian => norm(out) <= T::lit(self.b_x),
                _ => true,
            };
            if ok {
                return;
            }
        }
    }

    /// `x = B (z v + sqrt(1 - z^2) u)` with `z^2` drawn from the conditional
    /// Beta(1/2, (d-1)/2) law above `gamma*^2` and `u` uniform on the sphere
    /// orthogonal to `v`.
    fn componentwise_margin(&self, rng: &mut ChaCha8Rng, out: &mut [f64], lo: f64, beta: &Beta) {
        let u: f64 = rng.random();
        let z2 = beta.inverse_cdf(lo + u * (1.0 - lo)).clamp(self.gamma_star * self.gamma_star, 1.0);
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        let z = sign * z2.sqrt();
        let perp = loop {
            self.normals(rng, out);
            let proj: f64 = out.iter().zip(&self.v_bar).map(|(a, b)| a * b).sum();
            out.iter_mut().zip(&self.v_bar).for_each(|(a, b)| *a -= proj * b);
            let n = out.iter().map(|v| v * v).sum::<f64>().sqrt();
            if n > 1e-12 {
                break n;
            }
        };
        let s = (1.0 - z2).max(0.0).sqrt() / perp;
        for (o, v) in out.iter_mut().zip(&self.v_bar) {
            *o = self.b_x * (z * v + s * *o);
        }
    }
}

/// Infinite stream of labeled samples for a spec.
pub struct SampleStream<T> {
    spec: DistributionSpec<T>,
    sampler: FeatureSampler,
    seed: u64,
    index: u64,
    features: ChaCha8Rng,
    noise: ChaCha8Rng,
    scratch: Vec<f64>,
}

impl<T: Scalar> SampleStream<T> {
    /// Writes the next sample's features into `x` and returns its label.
    pub fn next_into(&mut self, x: &mut [T]) -> i8 {
        if self.index > 0 && self.index.is_multiple_of(BLOCK as u64) {
            let block = self.index / BLOCK as u64;
            self.features = block_rng(self.seed, Purpose::Features, block);
            self.noise = block_rng(self.seed, Purpose::Noise, block);
        }
        self.index += 1;
        self.sampler.draw(&mut self.features, &mut self.scratch, x, &self.spec.v_bar);
        let clean = sgn(dot(&self.spec.v_bar, x));
        let u: f64 = self.noise.random();
        match self.spec.noise {
            NoiseModel::Rcn { eta } if u < eta.to_f64_lossy() => -clean,
            _ => clean,
        }
    }

    /// Number of samples drawn so far.
    pub fn position(&self) -> u64 {
        self.index
    }
}

/// Draws `n` i.i.d. samples and applies the spec's noise model.
pub fn sample<T: Scalar>(spec: &DistributionSpec<T>, n: usize, seed: u64) -> Result<Dataset<T>> {
    if n == 0 {
        return usage("sample size must be at least 1");
    }
    spec.validate()?;
    let clean_spec = spec.clone().with_noise(NoiseModel::None);
    let mut stream = clean_spec.stream(seed)?;
    let mut xs = vec![T::zero(); n * spec.d];
    let mut ys = Vec::with_capacity(n);
    for row in xs.chunks_exact_mut(spec.d) {
        ys.push(stream.next_into(row));
    }
    let meta = DatasetMeta { seed, spec_id: spec.id(), flip_fraction: 0.0, max_norm: 0.0 };
    let clean = Dataset::new(spec.d, xs, ys, meta)?;
    corrupt_labels(&clean, &spec.v_bar, &spec.noise, seed)
}

/// Applies a noise model to an uncorrupted dataset.
pub fn corrupt_labels<T: Scalar>(ds: &Dataset<T>, v_bar: &[T], noise: &NoiseModel<T>, seed: u64) -> Result<Dataset<T>> {
    noise.validate()?;
    if v_bar.len() != ds.d() {
        return Err(LabError::DimensionMismatch { expected: ds.d(), got: v_bar.len() });
    }
    let margins: Vec<T> = (0..ds.len()).map(|i| dot(v_bar, ds.x(i))).collect();
    if let Some(i) = (0..ds.len()).find(|&i| ds.y(i) != sgn(margins[i])) {
        return invalid(format!("row {i} is already inconsistent with the planted direction"));
    }
    let mut ys = ds.labels().to_vec();
    match *noise {
        NoiseModel::None => {}
        NoiseModel::Rcn { eta } => {
            let eta = eta.to_f64_lossy();
            let mut rng = block_rng(seed, Purpose::Noise, 0);
            for (i, y) in ys.iter_mut().enumerate() {
                if i > 0 && i % BLOCK == 0 {
                    rng = block_rng(seed, Purpose::Noise, (i / BLOCK) as u64);
                }
                let u: f64 = rng.random();
                if u < eta {
                    *y = -*y;
                }
            }
        }
        NoiseModel::BoundaryAdv { band, budget } => {
            let mut idx: Vec<usize> = (0..ds.len()).filter(|&i| margins[i].abs() <= band).collect();
            idx.sort_by(|&a, &b| {
                margins[a].abs().partial_cmp(&margins[b].abs()).expect("finite margins").then(a.cmp(&b))
            });
            let k = (budget.to_f64_lossy() * ds.len() as f64).floor() as usize;
            for &i in idx.iter().take(k) {
                ys[i] = -ys[i];
            }
        }
    }
    let flips = ys.iter().zip(ds.labels()).filter(|(a, b)| a != b).count();
    let mut meta = ds.meta.clone();
    meta.flip_fraction = flips as f64 / ds.len() as f64;
    Dataset::new(ds.d(), ds.features().to_vec(), ys, meta)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn covariance(ds: &Dataset<f64>) -> Vec<Vec<f64>> {
        let d = ds.d();
        let n = ds.len() as f64;
        let mut c = vec![vec![0.0; d]; d];
        for (x, _) in ds.rows() {
            for a in 0..d {
                for b in 0..d {
                    c[a][b] += x[a] * x[b] / n;
                }
            }
        }
        c
    }

    #[test]
    fn hard_margin_holds_on_unit_scale() {
        let spec = DistributionSpec::<f64>::hard_margin_sphere(5, 0.2);
        let ds = sample(&spec, 10_000, 3).unwrap();
        let min = ds.rows().map(|(x, _)| x[0].abs() / norm(x)).fold(f64::INFINITY, f64::min);
        assert!(min >= 0.2, "{min}");
        for (x, y) in ds.rows() {
            assert!((norm(x) - 1.0).abs() < 1e-12);
            assert!(y as f64 * x[0] >= 0.2);
        }
    }

    #[test]
    fn componentwise_margin_sampler_used_for_tiny_acceptance() {
        let spec = DistributionSpec::<f64>::hard_margin_sphere(50, 0.6);
        assert!(spec.margin_acceptance() < MIN_ACCEPTANCE);
        let ds = sample(&spec, 2000, 1).unwrap();
        for (x, y) in ds.rows() {
            assert!((norm(x) - 1.0).abs() < 1e-9);
            assert!(y as f64 * x[0] >= 0.6);
        }
        // conditional law of |z| is concentrated near the threshold
        let mean: f64 = ds.rows().map(|(x, _)| x[0].abs()).sum::<f64>() / 2000.0;
        assert!(mean > 0.6 && mean < 0.65, "{mean}");
    }

    #[test]
    fn gaussian_covariance_close_to_identity() {
        let ds = sample(&DistributionSpec::<f64>::gaussian(2), 100_000, 11).unwrap();
        let c = covariance(&ds);
        for (a, row) in c.iter().enumerate() {
            for (b, v) in row.iter().enumerate() {
                let target = if a == b { 1.0 } else { 0.0 };
                assert!((v - target).abs() < 0.05, "{a}{b} {v}");
            }
        }
    }

    #[test]
    fn uniform_ball_has_unit_coordinate_variance() {
        let ds = sample(&DistributionSpec::<f64>::uniform_ball_isotropic(3), 100_000, 5).unwrap();
        let c = covariance(&ds);
        for (a, row) in c.iter().enumerate() {
            assert!((0.97..=1.03).contains(&row[a]), "{}", row[a]);
        }
        assert!(ds.meta.max_norm <= 5f64.sqrt());
    }

    #[test]
    fn truncated_gaussian_respects_bound() {
        let spec = DistributionSpec::<f64>::truncated_gaussian(1);
        let ds = sample(&spec, 20_000, 2).unwrap();
        assert!(ds.meta.max_norm <= 2.0);
        assert!(spec.analytic().approximate);
    }

    #[test]
    fn rcn_zero_changes_nothing() {
        let spec = DistributionSpec::<f64>::gaussian(3);
        let clean = sample(&spec, 5000, 9).unwrap();
        let again = corrupt_labels(&clean, &spec.v_bar, &NoiseModel::Rcn { eta: 0.0 }, 9).unwrap();
        assert_eq!(clean.labels(), again.labels());
        assert_eq!(again.meta.flip_fraction, 0.0);
    }

    #[test]
    fn rcn_flip_fraction_within_three_sigma() {
        let spec = DistributionSpec::<f64>::gaussian(3).with_noise(NoiseModel::Rcn { eta: 0.1 });
        let ds = sample(&spec, 100_000, 21).unwrap();
        assert!((0.094..=0.106).contains(&ds.meta.flip_fraction), "{}", ds.meta.flip_fraction);
    }

    #[test]
    fn boundary_flips_are_the_smallest_margins() {
        let spec = DistributionSpec::<f64>::gaussian(4).with_noise(NoiseModel::BoundaryAdv { band: 0.1, budget: 0.05 });
        let ds = sample(&spec, 10_000, 8).unwrap();
        let flipped: Vec<f64> = ds.rows().filter(|(x, y)| sgn(x[0]) != *y).map(|(x, _)| x[0].abs()).collect();
        assert_eq!(flipped.len(), 500);
        let mut all: Vec<f64> = ds.rows().map(|(x, _)| x[0].abs()).collect();
        all.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let p5 = all[500];
        assert!(flipped.iter().all(|&m| m < p5));
    }

    #[test]
    fn invalid_noise_rates_rejected() {
        let spec = DistributionSpec::<f64>::gaussian(2).with_noise(NoiseModel::Rcn { eta: 0.5 });
        assert!(matches!(sample(&spec, 10, 0), Err(LabError::Validation(_))));
        let spec = DistributionSpec::<f64>::gaussian(2).with_noise(NoiseModel::BoundaryAdv { band: 0.1, budget: 0.6 });
        assert!(matches!(sample(&spec, 10, 0), Err(LabError::Validation(_))));
        assert!(matches!(sample(&DistributionSpec::<f64>::gaussian(2), 0, 0), Err(LabError::Usage(_))));
    }

    #[test]
    fn planted_opt_per_noise_model() {
        let p = planted_optimum(&DistributionSpec::<f64>::hard_margin_sphere(3, 0.2)).unwrap();
        assert_eq!(p.opt, 0.0);
        assert_eq!(p.soft_margin.unwrap().bound(0.1), Some(0.0));
        let p =
            planted_optimum(&DistributionSpec::<f64>::gaussian(3).with_noise(NoiseModel::Rcn { eta: 0.05 })).unwrap();
        assert_eq!(p.opt, 0.05);
        assert!(p.opt_exact);
        let g = DistributionSpec::<f64>::gaussian(3).analytic();
        assert_eq!(g.soft_margin.unwrap().bound(0.1), Some(0.2));
    }

    #[test]
    fn uniform_ball_density_oracle() {
        // d = 3: p(0) = Gamma(5/2) / (sqrt(pi) Gamma(2)) / sqrt(5) = 0.75 / sqrt(5)
        let u = DistributionSpec::<f64>::uniform_ball_isotropic(3).analytic().anti_concentration.unwrap();
        assert!((u - 0.75 / 5f64.sqrt()).abs() < 1e-12);
        let s = DistributionSpec::<f64>::separable_sphere(3).analytic().anti_concentration.unwrap();
        assert!((s - 0.5).abs() < 1e-12);
    }

    #[test]
    fn stream_matches_dataset_rows() {
        let spec = DistributionSpec::<f64>::gaussian(3).with_noise(NoiseModel::Rcn { eta: 0.2 });
        let ds = sample(&spec, 3000, 77).unwrap();
        let mut stream = spec.stream(77).unwrap();
        let mut x = vec![0.0; 3];
        for i in 0..3000 {
            let y = stream.next_into(&mut x);
            assert_eq!(x.as_slice(), ds.x(i));
            assert_eq!(y, ds.y(i));
        }
    }

    #[test]
    fn f32_datasets_keep_the_margin_in_f32() {
        let spec = DistributionSpec::<f32>::hard_margin_sphere(4, 0.3);
        let ds = sample(&spec, 5000, 4).unwrap();
        for (x, y) in ds.rows() {
            assert!(y as f32 * dot(&spec.v_bar, x) >= 0.3);
        }
    }
}
