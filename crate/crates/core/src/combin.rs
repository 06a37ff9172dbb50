//! Small exact-integer helpers.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub fn factorial(n: usize) -> BigInt {
    (2..=n).fold(BigInt::one(), |acc, k| acc * k)
}

/// `0!, 1!, ..., n_max!`.
pub fn factorials(n_max: usize) -> Vec<BigInt> {
    let mut out = Vec::with_capacity(n_max + 1);
    let mut acc = BigInt::one();
    out.push(acc.clone());
    for k in 1..=n_max {
        acc *= k;
        out.push(acc.clone());
    }
    out
}

pub fn binomial(n: usize, k: usize) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// `n (n-1) ... (n-k+1)`; zero when `k > n`.
pub fn falling(n: i64, k: usize) -> BigInt {
    (0..k as i64).fold(BigInt::one(), |acc, i| acc * BigInt::from(n - i))
}

pub fn rat(num: impl Into<BigInt>, den: impl Into<BigInt>) -> BigRational {
    BigRational::new(num.into(), den.into())
}

pub fn int(v: impl Into<BigInt>) -> BigRational {
    BigRational::from_integer(v.into())
}

/// Natural logarithm of a positive big integer, to `f64` accuracy.
pub fn ln_bigint(v: &BigInt) -> f64 {
    assert!(v.is_positive(), "ln of a non-positive integer");
    let bits = v.bits();
    if bits <= 1000 {
        return v.to_f64().expect("fits in f64").ln();
    }
    let shift = bits - 60;
    let top = (v >> shift).to_f64().expect("60-bit value");
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

/// Natural logarithm of a positive rational, robust to huge numerators and
/// denominators.
pub fn ln_rational(r: &BigRational) -> f64 {
    ln_bigint(r.numer()) - ln_bigint(r.denom())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomials() {
        assert_eq!(binomial(5, 2), BigInt::from(10));
        assert_eq!(binomial(5, 0), BigInt::from(1));
        assert_eq!(binomial(3, 4), BigInt::from(0));
        assert_eq!(binomial(30, 15), BigInt::from(155_117_520u64));
    }

    #[test]
    fn logs_of_huge_rationals() {
        let big = factorial(400);
        let expected: f64 = (2..=400).map(|k| (k as f64).ln()).sum();
        assert!((ln_bigint(&big) - expected).abs() < 1e-9 * expected);
        let r = rat(1, factorial(300));
        assert!((ln_rational(&r) + ln_bigint(&factorial(300))).abs() < 1e-9);
    }

    #[test]
    fn falling_factorials() {
        assert_eq!(falling(5, 0), BigInt::from(1));
        assert_eq!(falling(5, 3), BigInt::from(60));
        assert_eq!(falling(3, 5), BigInt::from(0));
    }
}
