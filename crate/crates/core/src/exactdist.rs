//! Exact laws on the non-negative integers: the fixed-point law of a uniform
//! permutation, derangement numbers, Poisson(1) references, and the distances
//! between them.
//!
//! Poisson(1) weights are `e^-1 / k!`. They are kept as the rational
//! coefficients `1/k!` times one shared enclosure of `e^-1`, so every distance
//! to the Poisson law comes back as an [`Interval`] with rational endpoints.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::combin::{factorial, factorials, rat};
use crate::error::{Error, Result};
use crate::interval::{exp_neg_one, exp_one, Interval};
use crate::scalar::{is_nonnegative, positive_part, Scalar};

/// A finitely supported law on the non-negative integers.
#[derive(Clone, Debug, PartialEq)]
pub struct Dist<T> {
    label: String,
    support: Vec<u64>,
    weights: Vec<T>,
}

impl<T: Scalar> Dist<T> {
    /// Validates: strictly increasing support, non-negative weights summing
    /// to one.
    pub fn new(label: impl Into<String>, support: Vec<u64>, weights: Vec<T>) -> Result<Self> {
        let label = label.into();
        let bad = |reason: String| Error::InvalidDistribution { label: label.clone(), reason };
        if support.len() != weights.len() {
            return Err(bad("support and weights differ in length".into()));
        }
        if support.is_empty() {
            return Err(bad("empty support".into()));
        }
        if support.windows(2).any(|w| w[0] >= w[1]) {
            return Err(bad("support is not strictly increasing".into()));
        }
        if let Some(i) = weights.iter().position(|w| !is_nonnegative(w)) {
            return Err(bad(format!("negative weight at x = {}", support[i])));
        }
        let total = crate::scalar::sum(&weights);
        if !total.close_to(&T::one()) {
            return Err(bad(format!("weights sum to {total:?}")));
        }
        Ok(Self { label, support, weights })
    }

    /// Normalizes non-negative masses into a law.
    pub fn from_masses(label: impl Into<String>, support: Vec<u64>, masses: Vec<T>) -> Result<Self> {
        let total = crate::scalar::sum(&masses);
        if total <= T::zero() {
            return Err(Error::InvalidDistribution {
                label: label.into(),
                reason: "total mass is not positive".into(),
            });
        }
        let weights = masses.into_iter().map(|m| m / total.clone()).collect();
        Self::new(label, support, weights)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn support(&self) -> &[u64] {
        &self.support
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn entries(&self) -> impl Iterator<Item = (u64, &T)> {
        self.support.iter().copied().zip(self.weights.iter())
    }

    pub fn max_support(&self) -> u64 {
        *self.support.last().expect("non-empty support")
    }

    /// Probability of `x`; zero outside the support.
    pub fn pmf(&self, x: u64) -> T {
        match self.support.binary_search(&x) {
            Ok(i) => self.weights[i].clone(),
            Err(_) => T::zero(),
        }
    }

    pub fn expectation(&self, f: impl Fn(u64) -> T) -> T {
        self.entries().fold(T::zero(), |acc, (x, w)| acc + f(x) * w.clone())
    }

    /// Conditions on `{x <= max}`.
    pub fn condition_at_most(&self, max: u64, label: impl Into<String>) -> Result<Self> {
        let (support, masses): (Vec<u64>, Vec<T>) =
            self.entries().filter(|(x, _)| *x <= max).map(|(x, w)| (x, w.clone())).unzip();
        Self::from_masses(label, support, masses)
    }

    pub fn map_scalar<U: Scalar>(&self, f: impl Fn(&T) -> U) -> Dist<U> {
        Dist {
            label: self.label.clone(),
            support: self.support.clone(),
            weights: self.weights.iter().map(f).collect(),
        }
    }
}

impl Dist<BigRational> {
    /// Rounds every weight once.
    pub fn to_scalar<U: Scalar>(&self) -> Dist<U> {
        self.map_scalar(U::from_rational)
    }
}

/// Total-variation normalization.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TvConvention {
    /// `sum_x (d1 - d2)_+`.
    Half,
    /// `sum_x |d1 - d2|`, twice the half convention.
    Total,
}

impl TvConvention {
    pub fn as_str(&self) -> &'static str {
        match self {
            TvConvention::Half => "half",
            TvConvention::Total => "total",
        }
    }
}

pub fn tv_distance<T: Scalar>(d1: &Dist<T>, d2: &Dist<T>, convention: TvConvention) -> T {
    let mut xs: Vec<u64> = d1.support().iter().chain(d2.support()).copied().collect();
    xs.sort_unstable();
    xs.dedup();
    xs.into_iter().fold(T::zero(), |acc, x| {
        let diff = d1.pmf(x) - d2.pmf(x);
        acc + match convention {
            TvConvention::Half => positive_part(diff),
            TvConvention::Total => diff.abs(),
        }
    })
}

/// `sup_x (1 - d1(x)/d2(x))` over points where `d2(x) > 0`.
pub fn separation_discrepancy<T: Scalar>(d1: &Dist<T>, d2: &Dist<T>) -> T {
    d2.entries()
        .filter(|(_, w)| **w > T::zero())
        .map(|(x, w)| T::one() - d1.pmf(x) / w.clone())
        .fold(None, |acc: Option<T>, v| match acc {
            Some(a) if a >= v => Some(a),
            _ => Some(v),
        })
        .unwrap_or_else(T::zero)
}

/// Exact derangement counts `D_0, ..., D_max`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DerangementTable {
    values: Vec<BigInt>,
}

impl DerangementTable {
    pub fn values(&self) -> &[BigInt] {
        &self.values
    }

    pub fn get(&self, n: usize) -> &BigInt {
        &self.values[n]
    }

    pub fn max_n(&self) -> usize {
        self.values.len() - 1
    }
}

/// `n! sum_{k<=n} (-1)^k / k!`, evaluated as an exact rational.
pub fn derangement_alternating_sum(n: usize) -> BigRational {
    let facts = factorials(n);
    let s: BigRational = (0..=n)
        .map(|k| {
            let sign = if k % 2 == 0 { 1 } else { -1 };
            rat(sign, facts[k].clone())
        })
        .sum();
    s * BigRational::from_integer(facts[n].clone())
}

/// Derangement numbers by `D_n = (n-1)(D_{n-1} + D_{n-2})`, each checked
/// against the alternating-sum formula.
pub fn derangements(n_max: usize) -> DerangementTable {
    let mut values = Vec::with_capacity(n_max + 1);
    values.push(BigInt::one());
    if n_max >= 1 {
        values.push(BigInt::zero());
    }
    for n in 2..=n_max {
        let d = (&values[n - 1] + &values[n - 2]) * (n - 1);
        values.push(d);
    }
    for (n, d) in values.iter().enumerate() {
        assert_eq!(
            BigRational::from_integer(d.clone()),
            derangement_alternating_sum(n),
            "derangement recurrence disagrees with the alternating sum at n = {n}"
        );
    }
    DerangementTable { values }
}

/// Law of the number of fixed points of a uniform permutation of size `n`:
/// `pi(x) = D_{n-x} / ((n-x)! x!)` on `{0..n-2} u {n}`.
pub fn fixed_point_pmf(n: usize) -> Result<Dist<BigRational>> {
    if n == 0 {
        return Err(Error::InvalidArgument("fixed_point_pmf needs N >= 1".into()));
    }
    let der = derangements(n);
    let facts = factorials(n);
    let (support, weights) = (0..=n)
        .filter(|&x| x + 1 != n)
        .map(|x| {
            let w = BigRational::new(der.get(n - x).clone(), &facts[n - x] * &facts[x]);
            (x as u64, w)
        })
        .unzip();
    Dist::new(format!("pi_{n}"), support, weights)
}

/// Poisson(1) as rational coefficients `1/k!` of the shared factor `e^-1`.
#[derive(Clone, Debug, PartialEq)]
pub struct PoissonRef {
    coefficients: Vec<BigRational>,
}

pub fn poisson_pmf(k_max: usize) -> PoissonRef {
    let coefficients = factorials(k_max).into_iter().map(|f| rat(1, f)).collect();
    PoissonRef { coefficients }
}

impl PoissonRef {
    pub fn k_max(&self) -> usize {
        self.coefficients.len() - 1
    }

    /// `1/k!`, so that `P(k) = e^-1 * coefficient(k)`.
    pub fn coefficient(&self, k: usize) -> &BigRational {
        &self.coefficients[k]
    }

    pub fn coefficients(&self) -> &[BigRational] {
        &self.coefficients
    }

    pub fn weight(&self, k: usize, e_inv: &Interval) -> Interval {
        e_inv.scale(&self.coefficients[k])
    }

    /// `sum_{k <= k_max} 1/k!`.
    pub fn head_coefficient(&self) -> BigRational {
        self.coefficients.iter().sum()
    }

    /// Mass beyond `k_max`: `1 - e^-1 sum_{k<=k_max} 1/k!`.
    pub fn tail_mass(&self, e_inv: &Interval) -> Interval {
        -e_inv.scale(&self.head_coefficient()) + BigRational::one()
    }

    /// Poisson(1) conditioned on `[0, k_max]`; weights proportional to `1/x!`.
    pub fn truncated(&self, label: impl Into<String>) -> Result<Dist<BigRational>> {
        let support = (0..=self.k_max() as u64).collect();
        Dist::from_masses(label, support, self.coefficients.clone())
    }
}

/// `zeta`: Poisson(1) conditioned on `[0, max]`.
pub fn poisson_truncated(max: usize) -> Result<Dist<BigRational>> {
    poisson_pmf(max).truncated(format!("zeta_{max}"))
}

/// Certified total-variation distance between an exact law and Poisson(1).
pub fn tv_to_poisson(d: &Dist<BigRational>, convention: TvConvention, digits: u32) -> Interval {
    let e_inv = exp_neg_one(digits);
    let k_max = d.max_support() as usize;
    let poisson = poisson_pmf(k_max);
    let mut acc = Interval::zero();
    for k in 0..=k_max {
        let diff = -poisson.weight(k, &e_inv) + d.pmf(k as u64);
        acc = acc
            + match convention {
                TvConvention::Half => diff.positive_part(),
                TvConvention::Total => diff.abs(),
            };
    }
    if convention == TvConvention::Total {
        acc = acc + poisson.tail_mass(&e_inv);
    }
    acc
}

/// The classical bracket on the total-convention distance:
/// `N/(N+2) 2^(N+1)/(N+1)!` and `(2^(N+1) - 1)/(N+1)!`.
pub fn tv_bracket(n: usize) -> (BigRational, BigRational) {
    let pow = BigInt::one() << (n + 1);
    let fact = factorial(n + 1);
    let lower = rat(n as i64, n as i64 + 2) * rat(pow.clone(), fact.clone());
    let upper = rat(pow - 1, fact);
    (lower, upper)
}

/// `2^N / (N+1)!`, the half-convention upper bound.
pub fn half_tv_upper(n: usize) -> BigRational {
    rat(BigInt::one() << n, factorial(n + 1))
}

/// Decimal digits needed to resolve the distance for `log_rate`:
/// `N log10 N + 20`.
pub fn log_rate_digits(n: usize) -> u32 {
    let n = n as f64;
    (n * n.log10()).ceil() as u32 + 20
}

/// `ln(TV(pi_N, Poisson)) / (N ln N)` with a certified enclosure of the
/// distance.
///
/// Fails with [`Error::PrecisionInsufficient`] when the distance is not
/// resolved to six significant digits at `digits` decimal digits.
pub fn log_rate(n: usize, convention: TvConvention, digits: u32) -> Result<f64> {
    if n < 4 {
        return Err(Error::InvalidArgument("log_rate needs N >= 4".into()));
    }
    let pi = fixed_point_pmf(n)?;
    let tv = tv_to_poisson(&pi, convention, digits);
    let resolved = tv.relative_width().map(|w| w < 1e-6).unwrap_or(false);
    if !resolved {
        return Err(Error::PrecisionInsufficient(format!(
            "distance for N = {n} not resolved at {digits} digits (need about {})",
            log_rate_digits(n)
        )));
    }
    let (lo, hi) = tv.ln_bounds().expect("certainly positive");
    let nf = n as f64;
    Ok(0.5 * (lo + hi) / (nf * nf.ln()))
}

/// `1 - d(x) / P(x) = 1 - d(x) e x!` as an enclosure.
pub fn poisson_ratio_deficit(d: &Dist<BigRational>, x: u64, digits: u32) -> Interval {
    let e = exp_one(digits);
    let coeff = d.pmf(x) * BigRational::from_integer(factorial(x as usize));
    -e.scale(&coeff) + BigRational::one()
}

/// Separation discrepancy `sup_x (1 - d(x)/P(x))` against Poisson(1).
///
/// Poisson(1) charges every integer, so any finitely supported `d` yields 1.
pub fn separation_to_poisson(d: &Dist<BigRational>, digits: u32) -> Interval {
    let mut best = Interval::point(BigRational::one());
    for &x in d.support() {
        let v = poisson_ratio_deficit(d, x, digits);
        if v.lo() > best.lo() {
            best = v;
        }
    }
    best
}

/// Limits of `1 - pi_N(N-j) / P(N-j)` as `N -> infinity`, i.e.
/// `1 - e D_j / j!`, for `j = 4` and `j = 3`.
pub fn separation_limit_candidates(digits: u32) -> (Interval, Interval) {
    let e = exp_one(digits);
    let der = derangements(4);
    let at = |j: usize| -e.scale(&rat(der.get(j).clone(), factorial(j))) + BigRational::one();
    (at(4), at(3))
}

/// The chain `sum (pi - P)_+ <= sum_{odd n<=N} 1/((n+1)!(N-n)!) <= 2^(N+1)/(N+1)!`.
#[derive(Clone, Debug)]
pub struct HalfTvChain {
    pub half_tv: Interval,
    pub odd_sum: BigRational,
    pub upper: BigRational,
}

impl HalfTvChain {
    pub fn holds(&self) -> bool {
        self.half_tv.certainly_le(&self.odd_sum) && self.odd_sum <= self.upper
    }
}

pub fn half_tv_chain(n: usize, digits: u32) -> Result<HalfTvChain> {
    let pi = fixed_point_pmf(n)?;
    let half_tv = tv_to_poisson(&pi, TvConvention::Half, digits);
    let facts = factorials(n + 1);
    let odd_sum = (1..=n)
        .step_by(2)
        .map(|m| rat(1, &facts[m + 1] * &facts[n - m]))
        .sum();
    let upper = rat(BigInt::one() << (n + 1), facts[n + 1].clone());
    Ok(HalfTvChain { half_tv, odd_sum, upper })
}

/// Checks that the total-convention distance lies in [`tv_bracket`].
pub fn bracket_holds(n: usize, digits: u32) -> Result<bool> {
    let pi = fixed_point_pmf(n)?;
    let tv = tv_to_poisson(&pi, TvConvention::Total, digits);
    let (lo, hi) = tv_bracket(n);
    Ok(tv.certainly_ge(&lo) && tv.certainly_le(&hi))
}
