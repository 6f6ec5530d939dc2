//! Floating point abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// A real scalar: `f32` or `f64`.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + ToPrimitive + Sum + Default + Debug + Display + Send + Sync + 'static
{
    /// Converts an `f64` literal. Never fails for finite inputs on `f32`/`f64`.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Converts a count.
    #[inline]
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable")
    }

    /// Tolerance for "unit norm" checks at this precision.
    fn unit_tolerance() -> Self {
        Self::lit(1e-12).max(Self::epsilon() * Self::lit(16.0))
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

#[inline]
pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = T::zero();
    for (x, y) in a.iter().zip(b) {
        acc = *x * *y + acc;
    }
    acc
}

#[inline]
pub(crate) fn norm<T: Scalar>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

#[inline]
pub(crate) fn dist<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut acc = T::zero();
    for (x, y) in a.iter().zip(b) {
        let d = *x - *y;
        acc = d * d + acc;
    }
    acc.sqrt()
}

/// Sign with the convention `sgn(0) = +1`.
#[inline]
pub fn sgn<T: Scalar>(v: T) -> i8 {
    if v < T::zero() {
        -1
    } else {
        1
    }
}

/// Half-width of a 3-sigma binomial interval around an empirical rate.
pub fn binomial_half_width<T: Scalar>(rate: T, n: usize) -> T {
    if n == 0 {
        return T::infinity();
    }
    let p = rate.max(T::zero()).min(T::one());
    T::lit(3.0) * (p * (T::one() - p) / T::from_count(n)).sqrt()
}

/// Neumaier compensated sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum<T> {
    sum: T,
    carry: T,
}

impl<T: Scalar> CompensatedSum<T> {
    #[inline]
    pub fn add(&mut self, v: T) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.carry = self.carry + ((self.sum - t) + v);
        } else {
            self.carry = self.carry + ((v - t) + self.sum);
        }
        self.sum = t;
    }

    #[inline]
    pub fn total(&self) -> T {
        self.sum + self.carry
    }
}

impl<T: Scalar> FromIterator<T> for CompensatedSum<T> {
    fn from_iter<I: IntoIterator<Item = T>>(iter: I) -> Self {
        let mut s = Self { sum: T::zero(), carry: T::zero() };
        iter.into_iter().for_each(|v| s.add(v));
        s
    }
}
