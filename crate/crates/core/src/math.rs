//! Scalar abstraction and numerically stable softmax helpers.

use core::fmt::Debug;
use core::iter::Sum;
use core::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point type used by networks and losses (`f32` or `f64`).
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Default
    + Debug
    + Send
    + Sync
    + 'static
{
    fn of(x: f64) -> Self;
    fn f64(self) -> f64;
}

impl Scalar for f32 {
    #[inline]
    fn of(x: f64) -> Self {
        x as f32
    }
    #[inline]
    fn f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    #[inline]
    fn of(x: f64) -> Self {
        x
    }
    #[inline]
    fn f64(self) -> f64 {
        self
    }
}

/// `log(sum(exp(xs)))`; returns `-inf` for an empty or all `-inf` input.
pub fn log_sum_exp<T: Scalar>(xs: &[T]) -> T {
    let max = xs.iter().copied().fold(T::neg_infinity(), T::max);
    if max == T::neg_infinity() {
        return max;
    }
    let sum: T = xs.iter().map(|&x| (x - max).exp()).sum();
    max + sum.ln()
}

/// Stable two-term log-sum-exp.
#[inline]
pub fn log_add_exp<T: Scalar>(a: T, b: T) -> T {
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    if hi == T::neg_infinity() {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// Writes `log_softmax(logits)` into `out`, subtracting the max first.
pub fn log_softmax_into<T: Scalar>(logits: &[T], out: &mut [T]) {
    debug_assert_eq!(logits.len(), out.len());
    let lse = log_sum_exp(logits);
    for (o, &l) in out.iter_mut().zip(logits) {
        *o = l - lse;
    }
}

/// Writes `softmax(logits)` into `out`.
pub fn softmax_into<T: Scalar>(logits: &[T], out: &mut [T]) {
    debug_assert_eq!(logits.len(), out.len());
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let mut sum = T::zero();
    for (o, &l) in out.iter_mut().zip(logits) {
        *o = (l - max).exp();
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

/// Inverse-CDF draw from a (possibly unnormalized) discrete distribution
/// given a uniform `u` in `[0, 1)`. Falls back to the last positive entry
/// when rounding leaves `u` past the total.
pub fn sample_index<T: Scalar>(probs: &[T], u: f64) -> usize {
    let total: f64 = probs.iter().map(|p| p.f64()).sum();
    let target = u * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (i, p) in probs.iter().enumerate() {
        let p = p.f64();
        if p > 0.0 {
            last = i;
        }
        acc += p;
        if target < acc {
            return i;
        }
    }
    last
}

/// Index of the first maximum.
pub fn argmax<T: PartialOrd + Copy>(xs: &[T]) -> usize {
    let mut best = 0;
    for i in 1..xs.len() {
        if xs[i] > xs[best] {
            best = i;
        }
    }
    best
}

/// Natural-log entropy of a probability vector, treating `0 log 0` as 0.
pub fn entropy(probs: &[f64]) -> f64 {
    probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * Float::ln(p))
        .sum()
}

/// Sample mean and unbiased sample variance.
pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    (mean, ss / (n - 1) as f64)
}

/// Half width of the normal-approximation 95% interval of the mean.
pub fn ci95(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let (_, var) = mean_var(xs);
    1.96 * Float::sqrt(var) / Float::sqrt(xs.len() as f64)
}
