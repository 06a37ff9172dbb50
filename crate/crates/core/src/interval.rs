//! Closed intervals with exact rational endpoints.
//!
//! Poisson(1) weights carry the transcendental factor `e^-1`. Every quantity
//! that involves it is evaluated on an enclosure of `e^-1`, so comparisons
//! against rational bounds are certified rather than rounded.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::combin::{int, ln_rational, rat};

/// Default number of decimal digits for transcendental enclosures.
pub const DEFAULT_DIGITS: u32 = 50;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Interval {
    lo: BigRational,
    hi: BigRational,
}

impl Interval {
    pub fn new(lo: BigRational, hi: BigRational) -> Self {
        assert!(lo <= hi, "interval endpoints out of order");
        Self { lo, hi }
    }

    pub fn point(v: BigRational) -> Self {
        Self { lo: v.clone(), hi: v }
    }

    pub fn zero() -> Self {
        Self::point(BigRational::zero())
    }

    pub fn lo(&self) -> &BigRational {
        &self.lo
    }

    pub fn hi(&self) -> &BigRational {
        &self.hi
    }

    pub fn width(&self) -> BigRational {
        &self.hi - &self.lo
    }

    pub fn midpoint(&self) -> BigRational {
        (&self.lo + &self.hi) / int(2)
    }

    pub fn to_f64(&self) -> f64 {
        self.midpoint().to_f64().unwrap_or(f64::NAN)
    }

    pub fn contains(&self, v: &BigRational) -> bool {
        &self.lo <= v && v <= &self.hi
    }

    /// Certainly `<= bound`.
    pub fn certainly_le(&self, bound: &BigRational) -> bool {
        &self.hi <= bound
    }

    /// Certainly `>= bound`.
    pub fn certainly_ge(&self, bound: &BigRational) -> bool {
        &self.lo >= bound
    }

    pub fn certainly_positive(&self) -> bool {
        self.lo.is_positive()
    }

    pub fn certainly_negative(&self) -> bool {
        self.hi.is_negative()
    }

    pub fn scale(&self, k: &BigRational) -> Self {
        let a = &self.lo * k;
        let b = &self.hi * k;
        if a <= b {
            Self { lo: a, hi: b }
        } else {
            Self { lo: b, hi: a }
        }
    }

    pub fn abs(&self) -> Self {
        if !self.lo.is_negative() {
            self.clone()
        } else if !self.hi.is_positive() {
            -self.clone()
        } else {
            let hi = self.hi.clone().max(-self.lo.clone());
            Self { lo: BigRational::zero(), hi }
        }
    }

    pub fn positive_part(&self) -> Self {
        let zero = BigRational::zero();
        Self {
            lo: self.lo.clone().max(zero.clone()),
            hi: self.hi.clone().max(zero),
        }
    }

    /// Natural log of an interval that is certainly positive, as an `f64`
    /// pair `(ln lo, ln hi)`.
    pub fn ln_bounds(&self) -> Option<(f64, f64)> {
        if !self.certainly_positive() {
            return None;
        }
        Some((ln_rational(&self.lo), ln_rational(&self.hi)))
    }

    /// Relative width `(hi - lo) / lo`, for certainly-positive intervals.
    pub fn relative_width(&self) -> Option<f64> {
        if !self.certainly_positive() {
            return None;
        }
        (self.width() / &self.lo).to_f64()
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{:.12e}, {:.12e}]",
            self.lo.to_f64().unwrap_or(f64::NAN),
            self.hi.to_f64().unwrap_or(f64::NAN)
        )
    }
}

impl Add for Interval {
    type Output = Interval;
    fn add(self, rhs: Interval) -> Interval {
        Interval { lo: self.lo + rhs.lo, hi: self.hi + rhs.hi }
    }
}

impl<'a> Add<&'a Interval> for Interval {
    type Output = Interval;
    fn add(self, rhs: &'a Interval) -> Interval {
        Interval { lo: self.lo + &rhs.lo, hi: self.hi + &rhs.hi }
    }
}

impl Sub for Interval {
    type Output = Interval;
    fn sub(self, rhs: Interval) -> Interval {
        Interval { lo: self.lo - rhs.hi, hi: self.hi - rhs.lo }
    }
}

impl Neg for Interval {
    type Output = Interval;
    fn neg(self) -> Interval {
        Interval { lo: -self.hi, hi: -self.lo }
    }
}

impl Mul for Interval {
    type Output = Interval;
    fn mul(self, rhs: Interval) -> Interval {
        let c = [
            &self.lo * &rhs.lo,
            &self.lo * &rhs.hi,
            &self.hi * &rhs.lo,
            &self.hi * &rhs.hi,
        ];
        let lo = c.iter().min().cloned().unwrap();
        let hi = c.iter().max().cloned().unwrap();
        Interval { lo, hi }
    }
}

impl Add<BigRational> for Interval {
    type Output = Interval;
    fn add(self, rhs: BigRational) -> Interval {
        Interval { lo: self.lo + &rhs, hi: self.hi + rhs }
    }
}

fn tolerance(digits: u32) -> BigRational {
    rat(1, BigInt::from(10).pow(digits))
}

/// Enclosure of `exp(r)` for `|r| <= 1`, of width below `10^-digits`.
///
/// Uses the Taylor partial sum and the remainder bound
/// `|R_K| <= 2 |r|^(K+1) / (K+1)!`, valid for `|r| <= 1`.
pub fn exp_small(r: &BigRational, digits: u32) -> Interval {
    assert!(r.abs() <= BigRational::one(), "exp_small needs |r| <= 1");
    let tol = tolerance(digits + 2);
    let mut term = BigRational::one();
    let mut partial = BigRational::one();
    let mut k = 0usize;
    loop {
        k += 1;
        term = term * r / int(k as i64);
        partial += &term;
        let remainder = term.abs() * r.abs() * int(2) / int(k as i64 + 1);
        if remainder < tol {
            return Interval::new(&partial - &remainder, &partial + &remainder);
        }
    }
}

/// Enclosure of `e^-1` from consecutive alternating partial sums of
/// `sum (-1)^k / k!`, of width below `10^-digits`.
pub fn exp_neg_one(digits: u32) -> Interval {
    let tol = tolerance(digits);
    let mut term = BigRational::one();
    let mut partial = BigRational::one();
    let mut k = 0i64;
    loop {
        k += 1;
        term = -term / int(k);
        let next = &partial + &term;
        if term.abs() < tol {
            return if partial <= next {
                Interval::new(partial, next)
            } else {
                Interval::new(next, partial)
            };
        }
        partial = next;
    }
}

/// Enclosure of `e` as the reciprocal of [`exp_neg_one`].
pub fn exp_one(digits: u32) -> Interval {
    let inv = exp_neg_one(digits + 1);
    Interval::new(inv.hi.recip(), inv.lo.recip())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn e_inverse_enclosure_is_tight_and_correct() {
        let iv = exp_neg_one(50);
        assert!(iv.width() < tolerance(50));
        let f = iv.to_f64();
        assert!((f - (-1.0f64).exp()).abs() < 1e-16);
    }

    #[test]
    fn exp_small_matches_std() {
        for (n, d) in [(1, 10), (-1, 10), (1, 200), (-1, 1)] {
            let r = rat(n, d);
            let iv = exp_small(&r, 40);
            let expect = (n as f64 / d as f64).exp();
            assert!((iv.to_f64() - expect).abs() < 1e-15);
            assert!(iv.width() < tolerance(40));
        }
    }

    #[test]
    fn abs_and_positive_part() {
        let iv = Interval::new(int(-1), int(2));
        assert_eq!(iv.abs(), Interval::new(int(0), int(2)));
        assert_eq!(iv.positive_part(), Interval::new(int(0), int(2)));
        let neg = Interval::new(int(-3), int(-1));
        assert_eq!(neg.abs(), Interval::new(int(1), int(3)));
        assert_eq!(neg.positive_part(), Interval::zero());
    }

    #[test]
    fn e_times_e_inverse_contains_one() {
        let prod = exp_one(30) * exp_neg_one(30);
        assert!(prod.contains(&BigRational::one()));
    }
}
