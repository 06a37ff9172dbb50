//! Two other couplings of the fixed-point law with Poisson(1): adjacent
//! products of independent Bernoulli(1/n) bits, and first ascents and peaks
//! of an i.i.d. uniform sequence.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand_core::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::combin::{factorial, rat};
use crate::error::{Error, Result};
use crate::exactdist::Dist;
use crate::perm::Guard;
use crate::rng::{next_dyadic, next_unit_open_low, replica_rng};

/// Default guard for [`peak_tail_exact`].
pub const PEAK_GUARD: usize = 10;

/// Exact law of `S_N = X_1X_2 + ... + X_{N-1}X_N + X_N`, `P[X_i = 1] = 1/i`.
pub fn mallows_exact_pmf(n: usize) -> Result<Dist<BigRational>> {
    if n == 0 {
        return Err(Error::InvalidArgument("S_N needs N >= 1".into()));
    }
    // mass[b][s]: last bit b, partial sum of adjacent products s
    let mut mass = [vec![BigRational::zero(); n + 1], vec![BigRational::zero(); n + 1]];
    mass[1][0] = BigRational::one();
    for i in 2..=n {
        let on = rat(1, i as i64);
        let off = BigRational::one() - &on;
        let mut next = [vec![BigRational::zero(); n + 1], vec![BigRational::zero(); n + 1]];
        for s in 0..n {
            for (b, row) in mass.iter().enumerate() {
                if row[s].is_zero() {
                    continue;
                }
                next[0][s] += &row[s] * &off;
                next[1][s + b] += &row[s] * &on;
            }
        }
        mass = next;
    }
    let mut law = vec![BigRational::zero(); n + 1];
    for s in 0..=n {
        law[s] += &mass[0][s];
        if s < n {
            law[s + 1] += &mass[1][s];
        }
    }
    let (support, weights): (Vec<u64>, Vec<BigRational>) =
        law.into_iter().enumerate().filter(|(_, w)| !w.is_zero()).map(|(s, w)| (s as u64, w)).unzip();
    Dist::new(format!("S_{n}"), support, weights)
}

/// Bits `X_1..X_K`, stored by the positions of their ones.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MallowsSample {
    pub truncation: u64,
    /// Increasing positions `i <= K` with `X_i = 1`; always starts with 1.
    pub ones: Vec<u64>,
    pub n: u64,
    pub s_n: u64,
    /// `sum_{i < K} X_i X_{i+1}`.
    pub s_trunc: u64,
}

impl MallowsSample {
    /// Draws the ones by skipping: after a one at `m` the next one is at
    /// `floor(m/U) + 1`, since `P[no one in (m, j]] = m/j`.
    pub fn draw(n: u64, truncation: u64, rng: &mut impl RngCore) -> Result<Self> {
        if truncation < n + 1 {
            return Err(Error::InvalidArgument("truncation must be at least N + 1".into()));
        }
        let mut ones = vec![1u64];
        loop {
            let m = *ones.last().expect("non-empty") as f64;
            let next = (m / next_unit_open_low(rng)).floor() + 1.0;
            if next > truncation as f64 {
                break;
            }
            ones.push(next as u64);
        }
        let mut s = Self { truncation, ones, n, s_n: 0, s_trunc: 0 };
        s.s_n = s.recompute_s_n();
        s.s_trunc = s.adjacent_pairs_up_to(truncation);
        Ok(s)
    }

    pub fn bit(&self, i: u64) -> bool {
        self.ones.binary_search(&i).is_ok()
    }

    fn adjacent_pairs_up_to(&self, last: u64) -> u64 {
        self.ones.windows(2).filter(|w| w[1] == w[0] + 1 && w[1] <= last).count() as u64
    }

    pub fn recompute_s_n(&self) -> u64 {
        self.adjacent_pairs_up_to(self.n) + u64::from(self.bit(self.n))
    }

    /// `sum_{k >= K} 1/(k(k+1)) = 1/K` bounds the mass of pairs beyond `K`.
    pub fn tail_bound(&self) -> BigRational {
        rat(1, self.truncation)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MallowsDiscrepancy {
    pub n: u64,
    pub replicas: u64,
    pub truncation: u64,
    /// Empirical `P[S_N != S_K]`.
    pub estimate: f64,
    pub sigma: f64,
    /// Additive error from truncating `S_infinity` at `K`.
    pub tail_bound: f64,
}

/// Monte Carlo estimate of `P[S_N != S_infinity]`, truncating at `K`.
pub fn mallows_discrepancy(n: u64, replicas: u64, truncation: u64, seed: u64) -> Result<MallowsDiscrepancy> {
    if replicas == 0 {
        return Err(Error::InvalidArgument("replicas must be >= 1".into()));
    }
    let hits: u64 = chunks(replicas)
        .into_par_iter()
        .map(|(stream, len)| {
            let mut rng = replica_rng(seed, stream);
            let mut c = 0u64;
            for _ in 0..len {
                let s = MallowsSample::draw(n, truncation, &mut rng)?;
                c += u64::from(s.s_n != s.s_trunc);
            }
            Ok(c)
        })
        .collect::<Result<Vec<u64>>>()?
        .into_iter()
        .sum();
    let p = hits as f64 / replicas as f64;
    Ok(MallowsDiscrepancy {
        n,
        replicas,
        truncation,
        estimate: p,
        sigma: (p * (1.0 - p) / replicas as f64).sqrt(),
        tail_bound: 1.0 / truncation as f64,
    })
}

const CHUNK: u64 = 4096;

/// `(stream, length)` blocks covering `total` samples.
fn chunks(total: u64) -> Vec<(u64, u64)> {
    (0..total.div_ceil(CHUNK)).map(|c| (c, CHUNK.min(total - c * CHUNK))).collect()
}

/// First ascent and first peak of a uniform sequence.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AscentPeakSample {
    pub consumed: u64,
    /// `min{n >= 1 : U_n < U_{n+1}}`.
    pub s: u64,
    /// `min{n >= 2 : U_n > max(U_{n-1}, U_{n+1})}`.
    pub t: u64,
}

impl AscentPeakSample {
    /// `S - [T - S odd]`.
    pub fn m(&self) -> u64 {
        self.s - (self.t - self.s) % 2
    }

    /// `(S_N, T_N, M_N)` with `S_N = min(S, N)`, `T_N = min(T, N)`.
    pub fn truncated(&self, n: u64) -> (u64, u64, u64) {
        let (s, t) = (self.s.min(n), self.t.min(n));
        (s, t, s - t.abs_diff(s) % 2)
    }

    pub fn m_n(&self, n: u64) -> u64 {
        self.truncated(n).2
    }

    /// Scans `u` for `S` and `T`; `None` if they are not both determined or
    /// two consecutive values tie.
    pub fn from_values(u: &[u64]) -> Option<Self> {
        scan(u.iter().copied()).ok().flatten()
    }
}

/// A tie between consecutive uniforms.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Tie;

fn scan(values: impl Iterator<Item = u64>) -> std::result::Result<Option<AscentPeakSample>, Tie> {
    let mut prev2: Option<u64> = None;
    let mut prev: Option<u64> = None;
    let mut s = None;
    let mut consumed = 0u64;
    for v in values {
        consumed += 1;
        if let Some(p) = prev {
            if p == v {
                return Err(Tie);
            }
            // index of `p` is consumed - 1
            let idx = consumed - 1;
            if s.is_none() && p < v {
                s = Some(idx);
            }
            if let Some(q) = prev2 {
                if idx >= 2 && p > q && p > v {
                    return Ok(Some(AscentPeakSample { consumed, s: s.expect("ascent precedes peak"), t: idx }));
                }
            }
        }
        prev2 = prev;
        prev = Some(v);
    }
    Ok(None)
}

/// Consumes uniforms until both `S` and `T` are known; `Err(Tie)` on an
/// exact tie.
pub fn ascent_peak_sample(rng: &mut impl RngCore) -> std::result::Result<AscentPeakSample, Tie> {
    let draws = std::iter::from_fn(|| Some(next_dyadic(rng)));
    scan(draws).map(|s| s.expect("infinite sequence"))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AscentPeakConfig {
    pub samples: u64,
    pub seed: u64,
    /// Truncation levels `N` for which `M_N` is tallied.
    pub ns: Vec<u64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AscentPeakBatch {
    pub samples: u64,
    pub ties: u64,
    pub m_counts: BTreeMap<u64, u64>,
    /// Per `N`: counts of `M_N`.
    pub mn_counts: BTreeMap<u64, BTreeMap<u64, u64>>,
    /// Per `N`: number of samples with `M != M_N`.
    pub disagreements: BTreeMap<u64, u64>,
}

impl AscentPeakBatch {
    fn merge(mut self, other: Self) -> Self {
        self.samples += other.samples;
        self.ties += other.ties;
        for (k, c) in other.m_counts {
            *self.m_counts.entry(k).or_default() += c;
        }
        for (n, counts) in other.mn_counts {
            let e = self.mn_counts.entry(n).or_default();
            for (k, c) in counts {
                *e.entry(k).or_default() += c;
            }
        }
        for (n, c) in other.disagreements {
            *self.disagreements.entry(n).or_default() += c;
        }
        self
    }

    /// Samples that were not discarded for a tie.
    pub fn valid(&self) -> u64 {
        self.samples - self.ties
    }

    /// Half-convention distance between the empirical law of `counts` and a
    /// reference pmf; reference mass outside the observed support counts too.
    pub fn half_tv(&self, counts: &BTreeMap<u64, u64>, reference: impl Fn(u64) -> f64, reference_max: u64) -> f64 {
        let total = self.valid() as f64;
        let top = counts.keys().next_back().copied().unwrap_or(0).max(reference_max);
        let mut covered = 0.0;
        let mut sum = 0.0;
        for k in 0..=top {
            let r = reference(k);
            covered += r;
            let e = counts.get(&k).copied().unwrap_or(0) as f64 / total;
            sum += (e - r).abs();
        }
        0.5 * (sum + (1.0 - covered).max(0.0))
    }

    pub fn m_tv_to_poisson(&self) -> f64 {
        let e_inv = (-1.0f64).exp();
        let mut w = vec![e_inv];
        for k in 1..40 {
            let last = w[k - 1];
            w.push(last / k as f64);
        }
        self.half_tv(&self.m_counts, |k| w.get(k as usize).copied().unwrap_or(0.0), 39)
    }

    pub fn mn_tv_to(&self, n: u64, law: &Dist<BigRational>) -> f64 {
        let f = law.to_scalar::<f64>();
        self.half_tv(&self.mn_counts[&n], |k| f.pmf(k), law.max_support())
    }

    /// Empirical `P[M != M_N]` with its standard error.
    pub fn disagreement(&self, n: u64) -> (f64, f64) {
        let p = self.disagreements.get(&n).copied().unwrap_or(0) as f64 / self.valid() as f64;
        (p, (p * (1.0 - p) / self.valid() as f64).sqrt())
    }
}

pub fn ascent_peak_batch(cfg: &AscentPeakConfig) -> AscentPeakBatch {
    chunks(cfg.samples)
        .into_par_iter()
        .map(|(stream, len)| {
            let mut rng = replica_rng(cfg.seed, stream);
            let mut b = AscentPeakBatch { samples: len, ..Default::default() };
            for _ in 0..len {
                let Ok(s) = ascent_peak_sample(&mut rng) else {
                    b.ties += 1;
                    continue;
                };
                let m = s.m();
                *b.m_counts.entry(m).or_default() += 1;
                for &n in &cfg.ns {
                    let mn = s.m_n(n);
                    *b.mn_counts.entry(n).or_default().entry(mn).or_default() += 1;
                    *b.disagreements.entry(n).or_default() += u64::from(mn != m);
                }
            }
            b
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(AscentPeakBatch::default(), AscentPeakBatch::merge)
}

/// Exact `P[T > N]`: the fraction of orderings of `U_1..U_{N+1}` with no peak
/// at any index in `[2, N]`, counted by depth-first search that abandons a
/// prefix as soon as it completes a peak.
pub fn peak_tail_exact(n: usize, guard: Guard) -> Result<BigRational> {
    if n == 0 {
        return Err(Error::InvalidArgument("P[T > N] needs N >= 1".into()));
    }
    guard.check(n)?;
    fn dfs(prefix: &mut Vec<u8>, used: u32, len: usize) -> u64 {
        let k = prefix.len();
        if k >= 3 {
            let (a, b, c) = (prefix[k - 3], prefix[k - 2], prefix[k - 1]);
            if b > a && b > c {
                return 0;
            }
        }
        if k == len {
            return 1;
        }
        let mut total = 0;
        for v in 0..len as u8 {
            if used & (1 << v) == 0 {
                prefix.push(v);
                total += dfs(prefix, used | (1 << v), len);
                prefix.pop();
            }
        }
        total
    }
    let count = dfs(&mut Vec::with_capacity(n + 1), 0, n + 1);
    Ok(BigRational::new(BigInt::from(count), factorial(n + 1)))
}

/// Exact law of `M_N` from all orderings of `U_1..U_{N+1}`; `T_N` and `S_N`
/// only look at the first `N+1` values.
pub fn ascent_peak_exact_law(n: usize, guard: Guard) -> Result<Dist<BigRational>> {
    if n == 0 {
        return Err(Error::InvalidArgument("M_N needs N >= 1".into()));
    }
    guard.check(n)?;
    let mut counts = vec![0u64; n + 1];
    crate::perm::for_each_permutation(n + 1, |p| {
        let vals: Vec<u64> = p.images().iter().map(|&v| v as u64).collect();
        let s = first_ascent(&vals).map_or(n as u64, |s| s.min(n as u64));
        let t = first_peak(&vals).map_or(n as u64, |t| t.min(n as u64));
        counts[(s - t.abs_diff(s) % 2) as usize] += 1;
    });
    let total = factorial(n + 1);
    let (support, weights): (Vec<u64>, Vec<BigRational>) = counts
        .into_iter()
        .enumerate()
        .filter(|(_, c)| *c > 0)
        .map(|(k, c)| (k as u64, BigRational::new(BigInt::from(c), total.clone())))
        .unzip();
    Dist::new(format!("M_{n}"), support, weights)
}

/// 1-based index of the first ascent among `vals`.
fn first_ascent(vals: &[u64]) -> Option<u64> {
    vals.windows(2).position(|w| w[0] < w[1]).map(|i| i as u64 + 1)
}

/// 1-based index of the first peak among `vals`.
fn first_peak(vals: &[u64]) -> Option<u64> {
    vals.windows(3).position(|w| w[1] > w[0] && w[1] > w[2]).map(|i| i as u64 + 2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactdist::fixed_point_pmf;

    const GUARD: Guard = Guard::new(PEAK_GUARD);

    fn same_law(a: &Dist<BigRational>, b: &Dist<BigRational>, n: usize) -> bool {
        (0..=n as u64 + 1).all(|k| a.pmf(k) == b.pmf(k))
    }

    #[test]
    fn mallows_law_small() {
        let one = mallows_exact_pmf(1).unwrap();
        assert_eq!(one.support(), &[1]);
        for n in [2, 4, 8] {
            assert!(same_law(&mallows_exact_pmf(n).unwrap(), &fixed_point_pmf(n).unwrap(), n));
        }
    }

    #[test]
    fn mallows_samples_are_consistent() {
        let mut rng = replica_rng(4, 0);
        for _ in 0..500 {
            let s = MallowsSample::draw(10, 200, &mut rng).unwrap();
            assert!(s.bit(1));
            assert_eq!(s.s_n, s.recompute_s_n());
            assert!(s.ones.iter().all(|&i| i <= 200));
            assert_eq!(s.tail_bound(), rat(1, 200));
        }
        assert!(MallowsSample::draw(10, 10, &mut rng).is_err());
    }

    #[test]
    fn mallows_first_two_bits() {
        // X_2 = 1 with probability 1/2
        let mut rng = replica_rng(8, 0);
        let hits = (0..20_000)
            .filter(|_| MallowsSample::draw(3, 10, &mut rng).unwrap().bit(2))
            .count() as f64;
        assert!((hits / 20_000.0 - 0.5).abs() < 0.02);
    }

    #[test]
    fn scan_examples() {
        // 5 > 4 > 3 < 6 > 1
        let s = AscentPeakSample::from_values(&[5, 4, 3, 6, 1]).unwrap();
        assert_eq!((s.s, s.t, s.consumed), (3, 4, 5));
        assert_eq!(s.m(), 2);
        assert_eq!(s.truncated(2), (2, 2, 2));
        assert!(AscentPeakSample::from_values(&[3, 2, 1]).is_none());
        assert!(scan([1u64, 1].into_iter()).is_err());
    }

    #[test]
    fn peak_tail_values() {
        assert_eq!(peak_tail_exact(2, GUARD).unwrap(), rat(2, 3));
        assert_eq!(peak_tail_exact(3, GUARD).unwrap(), rat(1, 3));
        for n in 1..=8 {
            let bound = BigRational::new(BigInt::from(2).pow(n as u32), factorial(n + 1));
            assert!(peak_tail_exact(n, GUARD).unwrap() <= bound);
        }
        assert!(matches!(peak_tail_exact(11, GUARD), Err(Error::GuardExceeded { .. })));
    }

    #[test]
    fn truncated_law_is_fixed_point_law() {
        for n in 1..=6 {
            assert!(same_law(&ascent_peak_exact_law(n, GUARD).unwrap(), &fixed_point_pmf(n).unwrap(), n));
        }
    }

    #[test]
    fn batches_are_deterministic() {
        let cfg = AscentPeakConfig { samples: 10_000, seed: 2, ns: vec![3, 4] };
        let a = ascent_peak_batch(&cfg);
        assert_eq!(a, ascent_peak_batch(&cfg));
        assert_eq!(a.valid(), 10_000);
        assert!(a.m_tv_to_poisson() < 0.03);
    }
}
