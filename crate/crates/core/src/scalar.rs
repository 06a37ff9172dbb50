//! Scalar abstraction shared by distributions, kernels and the coupling stepper.
//!
//! Everything that only needs field operations and an order is written
//! against [`Scalar`], so the same code runs on exact rationals (the default
//! for every verification) and on `f64`/`f32` (the simulator hot loop).

use std::fmt::Debug;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Num, One, Signed, ToPrimitive};

/// 2^-53 as an `f64`.
const DYADIC_SCALE: f64 = 1.0 / (1u64 << 53) as f64;

/// A real-like number type: exact rationals or IEEE floats.
pub trait Scalar: Num + Signed + Clone + PartialOrd + Debug + Send + Sync + 'static {
    /// `true` for types whose arithmetic is exact.
    const EXACT: bool;

    /// Rounds (at most once) an exact rational into this type.
    fn from_rational(r: &BigRational) -> Self;

    /// Nearest `f64`.
    fn approx(&self) -> f64;

    /// Equality for exact types, a relative tolerance for floats.
    fn close_to(&self, other: &Self) -> bool;

    /// The dyadic number `k / 2^53`, exactly when the type allows it.
    fn from_dyadic53(k: u64) -> Self;

    fn from_i64(v: i64) -> Self {
        Self::from_rational(&BigRational::from_integer(BigInt::from(v)))
    }

    /// `num / den` for small integers.
    fn ratio(num: i64, den: i64) -> Self {
        Self::from_rational(&BigRational::new(BigInt::from(num), BigInt::from(den)))
    }
}

impl Scalar for BigRational {
    const EXACT: bool = true;

    fn from_rational(r: &BigRational) -> Self {
        r.clone()
    }

    fn approx(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn close_to(&self, other: &Self) -> bool {
        self == other
    }

    fn from_dyadic53(k: u64) -> Self {
        BigRational::new(BigInt::from(k), BigInt::one() << 53)
    }
}

impl Scalar for f64 {
    const EXACT: bool = false;

    fn from_rational(r: &BigRational) -> Self {
        ToPrimitive::to_f64(r).unwrap_or(f64::NAN)
    }

    fn approx(&self) -> f64 {
        *self
    }

    fn close_to(&self, other: &Self) -> bool {
        let scale = self.abs().max(other.abs()).max(1.0);
        (self - other).abs() <= 1e-12 * scale
    }

    fn from_dyadic53(k: u64) -> Self {
        (k & ((1u64 << 53) - 1)) as f64 * DYADIC_SCALE
    }
}

impl Scalar for f32 {
    const EXACT: bool = false;

    fn from_rational(r: &BigRational) -> Self {
        ToPrimitive::to_f32(r).unwrap_or(f32::NAN)
    }

    fn approx(&self) -> f64 {
        f64::from(*self)
    }

    fn close_to(&self, other: &Self) -> bool {
        let scale = self.abs().max(other.abs());
        (self - other).abs() <= 1e-5 * scale.max(1.0)
    }

    fn from_dyadic53(k: u64) -> Self {
        <f64 as Scalar>::from_dyadic53(k) as f32
    }
}

/// Sum of an iterator of scalars.
pub fn sum<'a, T: Scalar>(values: impl IntoIterator<Item = &'a T>) -> T {
    values.into_iter().fold(T::zero(), |acc, v| acc + v.clone())
}

/// `max(v, 0)`.
pub fn positive_part<T: Scalar>(v: T) -> T {
    if v > T::zero() {
        v
    } else {
        T::zero()
    }
}

/// Whether `v` is non-negative (exactly, or up to rounding for floats).
pub fn is_nonnegative<T: Scalar>(v: &T) -> bool {
    *v >= T::zero() || v.close_to(&T::zero())
}

pub(crate) fn is_zero<T: Scalar>(v: &T) -> bool {
    if T::EXACT {
        v.is_zero()
    } else {
        v.close_to(&T::zero())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dyadic_uniforms_agree_across_types() {
        let k = (1u64 << 52) + 12345;
        let exact = BigRational::from_dyadic53(k);
        let float = f64::from_dyadic53(k);
        assert_eq!(<f64 as Scalar>::from_rational(&exact), float);
        assert!(float < 1.0);
        assert_eq!(f64::from_dyadic53(0), 0.0);
    }

    #[test]
    fn ratio_rounds_once() {
        let third = f64::ratio(1, 3);
        assert_eq!(third, 1.0 / 3.0);
        assert_eq!(BigRational::ratio(2, 6), BigRational::new(1.into(), 3.into()));
    }

    #[test]
    fn close_to_is_exact_for_rationals() {
        let a = BigRational::ratio(1, 3);
        let b = BigRational::ratio(1, 3) + BigRational::new(1.into(), BigInt::from(10).pow(40));
        assert!(!a.close_to(&b));
        assert!(a.approx().close_to(&b.approx()));
    }
}
