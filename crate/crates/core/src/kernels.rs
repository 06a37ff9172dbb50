//! Row-stochastic kernels on explicit state lists, the conditional
//! expectation `p(x) = E[eta_2 | eta_1 = x]` computed three independent ways,
//! and the penta-diagonal and birth-and-death kernels built from it.

use std::collections::HashMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::combin::{factorial, int, rat};
use crate::error::{Error, Result};
use crate::exactdist::{derangements, Dist};
use crate::perm::{for_each_permutation, Guard};
use crate::scalar::{is_nonnegative, is_zero, Scalar};

/// Default enumeration guard for `p_bruteforce`.
pub const P_BRUTEFORCE_GUARD: usize = 8;

/// A square row-stochastic matrix with sparse rows, indexed by an explicit
/// ordered list of integer state ids.
#[derive(Clone, Debug, PartialEq)]
pub struct StochasticKernel<T> {
    label: String,
    states: Vec<i64>,
    index: HashMap<i64, usize>,
    /// `rows[i]`: `(column, value)` sorted by column, zeros omitted.
    rows: Vec<Vec<(usize, T)>>,
}

impl<T: Scalar> StochasticKernel<T> {
    /// Validates non-negativity and unit row sums.
    pub fn new(label: impl Into<String>, states: Vec<i64>, rows: Vec<Vec<(usize, T)>>) -> Result<Self> {
        let label = label.into();
        let bad = |reason: String| Error::InvalidKernel { label: label.clone(), reason };
        if rows.len() != states.len() {
            return Err(bad("row count differs from state count".into()));
        }
        let mut index = HashMap::with_capacity(states.len());
        for (i, &s) in states.iter().enumerate() {
            if index.insert(s, i).is_some() {
                return Err(bad(format!("duplicate state {s}")));
            }
        }
        let mut clean = Vec::with_capacity(rows.len());
        for (i, mut row) in rows.into_iter().enumerate() {
            row.sort_by_key(|(j, _)| *j);
            if row.windows(2).any(|w| w[0].0 == w[1].0) {
                return Err(bad(format!("duplicate column in row {}", states[i])));
            }
            let mut total = T::zero();
            for (j, v) in &row {
                if *j >= states.len() {
                    return Err(bad(format!("column {j} out of range")));
                }
                if !is_nonnegative(v) {
                    return Err(Error::NegativeEntry { label: label.clone(), from: states[i], to: states[*j] });
                }
                total = total + v.clone();
            }
            if !total.close_to(&T::one()) {
                return Err(bad(format!("row {} sums to {total:?}", states[i])));
            }
            row.retain(|(_, v)| !is_zero(v));
            clean.push(row);
        }
        Ok(Self { label, states, index, rows: clean })
    }

    /// Builds a kernel from its off-diagonal entries (given by state id); the
    /// diagonal takes whatever mass remains in each row.
    pub fn from_off_diagonal(
        label: impl Into<String>,
        states: Vec<i64>,
        entries: impl IntoIterator<Item = (i64, i64, T)>,
    ) -> Result<Self> {
        let label = label.into();
        let index: HashMap<i64, usize> = states.iter().enumerate().map(|(i, &s)| (s, i)).collect();
        let mut rows: Vec<Vec<(usize, T)>> = vec![Vec::new(); states.len()];
        for (from, to, v) in entries {
            let (Some(&i), Some(&j)) = (index.get(&from), index.get(&to)) else {
                return Err(Error::InvalidKernel {
                    label,
                    reason: format!("transition ({from}, {to}) leaves the state list"),
                });
            };
            if i == j {
                return Err(Error::InvalidKernel { label, reason: format!("explicit diagonal at {from}") });
            }
            if !is_nonnegative(&v) {
                return Err(Error::NegativeEntry { label, from, to });
            }
            if !is_zero(&v) {
                rows[i].push((j, v));
            }
        }
        for (i, row) in rows.iter_mut().enumerate() {
            let off: T = row.iter().fold(T::zero(), |acc, (_, v)| acc + v.clone());
            let diag = T::one() - off;
            if !is_nonnegative(&diag) {
                return Err(Error::NegativeEntry { label, from: states[i], to: states[i] });
            }
            row.push((i, diag));
        }
        Self::new(label, states, rows)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn states(&self) -> &[i64] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn index_of(&self, state: i64) -> Option<usize> {
        self.index.get(&state).copied()
    }

    pub fn row(&self, i: usize) -> &[(usize, T)] {
        &self.rows[i]
    }

    pub fn rows(&self) -> &[Vec<(usize, T)>] {
        &self.rows
    }

    /// Entry by positional indices.
    pub fn at(&self, i: usize, j: usize) -> T {
        match self.rows[i].binary_search_by_key(&j, |(c, _)| *c) {
            Ok(k) => self.rows[i][k].1.clone(),
            Err(_) => T::zero(),
        }
    }

    /// Entry by state ids; zero when either id is not a state.
    pub fn get(&self, from: i64, to: i64) -> T {
        match (self.index_of(from), self.index_of(to)) {
            (Some(i), Some(j)) => self.at(i, j),
            _ => T::zero(),
        }
    }

    /// Largest `|i - j|` over non-zero entries (positional).
    pub fn positional_bandwidth(&self) -> usize {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(i, r)| r.iter().map(move |(j, _)| i.abs_diff(*j)))
            .max()
            .unwrap_or(0)
    }

    /// Largest `|x - y|` over non-zero entries, measured on state ids.
    pub fn value_bandwidth(&self) -> u64 {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(i, r)| r.iter().map(move |(j, _)| self.states[i].abs_diff(self.states[*j])))
            .max()
            .unwrap_or(0)
    }

    /// `mu K`, with `mu` given positionally.
    pub fn left_apply(&self, mu: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.len()];
        for (i, row) in self.rows.iter().enumerate() {
            for (j, v) in row {
                out[*j] = out[*j].clone() + mu[i].clone() * v.clone();
            }
        }
        out
    }

    /// Weights of `d` on the state list, positionally.
    pub fn weights_of(&self, d: &Dist<T>) -> Vec<T> {
        self.states.iter().map(|&s| if s < 0 { T::zero() } else { d.pmf(s as u64) }).collect()
    }

    pub fn is_stationary(&self, d: &Dist<T>) -> bool {
        let mu = self.weights_of(d);
        let total: T = crate::scalar::sum(&mu);
        total.close_to(&T::one()) && self.left_apply(&mu).iter().zip(&mu).all(|(a, b)| a.close_to(b))
    }

    pub fn map_scalar<U: Scalar>(&self, f: impl Fn(&T) -> U) -> StochasticKernel<U> {
        StochasticKernel {
            label: self.label.clone(),
            states: self.states.clone(),
            index: self.index.clone(),
            rows: self.rows.iter().map(|r| r.iter().map(|(j, v)| (*j, f(v))).collect()).collect(),
        }
    }
}

impl StochasticKernel<BigRational> {
    /// Rounds every entry once; used for the simulator's double mode.
    pub fn to_scalar<U: Scalar>(&self) -> StochasticKernel<U> {
        self.map_scalar(U::from_rational)
    }
}

/// Which construction produced a [`PFunction`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PSource {
    Bruteforce,
    Closedform,
    Recursion,
}

/// `p(x) = E[eta_2 | eta_1 = x]` on `V = {0..N-2} u {N}`.
#[derive(Clone, Debug, PartialEq)]
pub struct PFunction {
    n: usize,
    states: Vec<u64>,
    values: Vec<BigRational>,
    source: PSource,
}

/// `V = {0..N-2} u {N}`.
pub fn state_space(n: usize) -> Vec<u64> {
    (0..=n as u64).filter(|&x| x + 1 != n as u64).collect()
}

impl PFunction {
    fn from_map(n: usize, source: PSource, value: impl Fn(u64) -> BigRational) -> Self {
        let states = state_space(n);
        let values = states.iter().map(|&x| value(x)).collect();
        Self { n, states, values, source }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn source(&self) -> PSource {
        self.source
    }

    pub fn states(&self) -> &[u64] {
        &self.states
    }

    pub fn values(&self) -> &[BigRational] {
        &self.values
    }

    pub fn entries(&self) -> impl Iterator<Item = (u64, &BigRational)> {
        self.states.iter().copied().zip(self.values.iter())
    }

    pub fn get(&self, x: u64) -> Option<&BigRational> {
        self.states.binary_search(&x).ok().map(|i| &self.values[i])
    }

    /// `p(x)`, panicking outside `V`.
    pub fn at(&self, x: u64) -> &BigRational {
        self.get(x).unwrap_or_else(|| panic!("p({x}) is undefined for N = {}", self.n))
    }

    /// Same values, ignoring provenance.
    pub fn same_values(&self, other: &PFunction) -> bool {
        self.n == other.n && self.values == other.values
    }

    /// `p(N) = 0`, `p(N-2) = 1`, `p(N-3) = 0`, `p >= 0`, and
    /// `N - x - 2p(x) >= 0` on `V`.
    pub fn check_invariants(&self) -> bool {
        let n = self.n as u64;
        let mut ok = self.at(n).is_zero();
        if n >= 2 {
            ok &= self.at(n - 2).is_one();
        }
        if n >= 3 {
            ok &= self.at(n - 3).is_zero();
        }
        ok && self.entries().all(|(x, p)| {
            !p.is_negative() && !(int(n as i64 - x as i64) - int(2) * p).is_negative()
        })
    }

    /// `2p(N-2-x) - 1` is positive for even `x` and negative for odd `x`, on
    /// `x in [0, N-2]`.
    pub fn sign_alternation_holds(&self) -> bool {
        let n = self.n as u64;
        if n < 2 {
            return true;
        }
        (0..=n - 2).all(|x| {
            let v = int(2) * self.at(n - 2 - x) - BigRational::one();
            if x % 2 == 0 {
                v.is_positive()
            } else {
                v.is_negative()
            }
        })
    }

    /// `|2p(x) - 1|` together with the two a-priori bounds, for `x <= N-2`.
    pub fn bound_rows(&self) -> Vec<BoundRow> {
        let n = self.n as u64;
        if n < 2 {
            return Vec::new();
        }
        (0..=n - 2)
            .map(|x| {
                let m = (n - x) as usize;
                let dev = (int(2) * self.at(x) - BigRational::one()).abs();
                BoundRow {
                    x,
                    p: self.at(x).clone(),
                    deviation: dev,
                    factorial_bound: rat(1, factorial(m - 2)),
                    derangement_bound: rat(3 * (m as i64 - 1), factorial(m)),
                }
            })
            .collect()
    }

    /// `|2p(x) - 1| <= 1/(N-x-2)!` for all `x <= N-2`.
    pub fn factorial_bound_holds(&self) -> bool {
        self.bound_rows().iter().all(|r| r.deviation <= r.factorial_bound)
    }

    /// `|2p(x) - 1| <= 3(N-x-1)/(N-x)!` for all `x <= N-2`.
    pub fn derangement_bound_holds(&self) -> bool {
        self.bound_rows().iter().all(|r| r.deviation <= r.derangement_bound)
    }

    /// `1/4 <= p(x) <= 3/4` on `[0, N-4]`.
    pub fn quarter_bounds_hold(&self) -> bool {
        let n = self.n as u64;
        if n < 4 {
            return true;
        }
        (0..=n - 4).all(|x| {
            let p = self.at(x);
            *p >= rat(1, 4) && *p <= rat(3, 4)
        })
    }
}

/// One line of the bound-margin table.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundRow {
    pub x: u64,
    pub p: BigRational,
    pub deviation: BigRational,
    pub factorial_bound: BigRational,
    pub derangement_bound: BigRational,
}

/// `p` by enumerating `S_N`.
pub fn p_bruteforce(n: usize, guard: Guard) -> Result<PFunction> {
    if n == 0 {
        return Err(Error::InvalidArgument("p needs N >= 1".into()));
    }
    guard.check(n)?;
    let mut eta2_sum = vec![0u64; n + 1];
    let mut count = vec![0u64; n + 1];
    for_each_permutation(n, |sigma| {
        let ct = sigma.cycle_type();
        let fixed = ct.fixed_points() as usize;
        eta2_sum[fixed] += u64::from(ct.eta(2));
        count[fixed] += 1;
    });
    Ok(PFunction::from_map(n, PSource::Bruteforce, |x| {
        rat(eta2_sum[x as usize], count[x as usize])
    }))
}

/// `p(x) = 1/2 (D_{N-x-2}/(N-x-2)!) ((N-x)!/D_{N-x})` on `x <= N-2`, `p(N) = 0`.
pub fn p_closedform(n: usize) -> Result<PFunction> {
    if n == 0 {
        return Err(Error::InvalidArgument("p needs N >= 1".into()));
    }
    let der = derangements(n);
    Ok(PFunction::from_map(n, PSource::Closedform, |x| {
        if x == n as u64 {
            return BigRational::zero();
        }
        let m = n - x as usize;
        let num = der.get(m - 2) * factorial(m);
        let den = factorial(m - 2) * der.get(m) * BigInt::from(2);
        BigRational::new(num, den)
    }))
}

/// `F_x(r) = (N-x)(N-x-1-r) / ((N-x-1)^2 - r)`; `None` at the pole.
pub fn recursion_map(n: usize, x: usize, r: &BigRational) -> Option<BigRational> {
    let m = int((n - x) as i64);
    let m1 = &m - BigRational::one();
    let den = &m1 * &m1 - r;
    if den.is_zero() {
        return None;
    }
    Some(&m * (&m1 - r) / den)
}

/// `p` from the downward iteration `k(x) = F_x(k(x+1))`, `k = 2p`, seeded by
/// `k(N-3) = 0`.
pub fn p_recursion(n: usize) -> Result<PFunction> {
    if n < 4 {
        return Err(Error::InvalidArgument("p_recursion needs N >= 4".into()));
    }
    let mut k = vec![BigRational::zero(); n - 2];
    for x in (0..n - 3).rev() {
        k[x] = recursion_map(n, x, &k[x + 1]).ok_or(Error::DivisionByZero { x })?;
    }
    Ok(PFunction::from_map(n, PSource::Recursion, |x| {
        let x = x as usize;
        if x == n {
            BigRational::zero()
        } else if x == n - 2 {
            BigRational::one()
        } else {
            &k[x] / int(2)
        }
    }))
}

fn denominator(n: usize) -> BigRational {
    int((n * (n - 1)) as i64)
}

/// The penta-diagonal kernel on `V`:
/// `P(x,x-1) = x(N-x)/D`, `P(x,x-2) = x(x-1)/D`, `P(x,x+1) = (N-x-2p(x))/D`,
/// `P(x,x+2) = 2p(x)/D` with `D = N(N-1)`, diagonal filling.
pub fn build_penta(p: &PFunction) -> Result<StochasticKernel<BigRational>> {
    penta_with_unit_factor(p, 1, "P")
}

/// The exact image of the transposition walk under `eta_1`.
///
/// Same as [`build_penta`] except that both unit moves run at twice the rate:
/// an unordered transposition `{i, j}` with `i` fixed and `j` moved can be
/// listed with either point first.
pub fn build_penta_projected(p: &PFunction) -> Result<StochasticKernel<BigRational>> {
    penta_with_unit_factor(p, 2, "Pproj")
}

fn penta_with_unit_factor(p: &PFunction, unit: i64, name: &str) -> Result<StochasticKernel<BigRational>> {
    let n = p.n();
    if n < 2 {
        return Err(Error::InvalidArgument("penta kernel needs N >= 2".into()));
    }
    let d = denominator(n);
    let ni = n as i64;
    let states: Vec<i64> = p.states().iter().map(|&x| x as i64).collect();
    let mut entries = Vec::new();
    for (x, px) in p.entries() {
        let x = x as i64;
        let up1 = int(ni - x) - int(2) * px;
        if up1.is_negative() {
            return Err(Error::NegativeEntry { label: name.into(), from: x, to: x + 1 });
        }
        let moves = [
            (x - 1, int(unit * x * (ni - x))),
            (x - 2, int(x * (x - 1))),
            (x + 1, int(unit) * up1),
            (x + 2, int(2) * px),
        ];
        for (y, w) in moves {
            if w.is_zero() {
                continue;
            }
            entries.push((x, y, w / &d));
        }
    }
    StochasticKernel::from_off_diagonal(format!("{name}_{n}"), states, entries)
}

/// Birth-and-death kernel on `V` keeping only unit moves, plus the
/// `N-2 <-> N` link.
pub fn build_tilde(p: &PFunction) -> Result<StochasticKernel<BigRational>> {
    let n = p.n();
    if n < 3 {
        return Err(Error::InvalidArgument("tilde kernel needs N >= 3".into()));
    }
    let d = denominator(n);
    let ni = n as i64;
    let states: Vec<i64> = p.states().iter().map(|&x| x as i64).collect();
    let mut entries = Vec::new();
    for (x, px) in p.entries() {
        let x = x as i64;
        if x == ni {
            entries.push((x, x - 2, BigRational::one()));
            continue;
        }
        if x > 0 {
            entries.push((x, x - 1, int(x * (ni - x)) / &d));
        }
        if x == ni - 2 {
            entries.push((x, ni, int(2) / &d));
        } else {
            let up = int(ni - x) - int(2) * px;
            if up.is_negative() {
                return Err(Error::NegativeEntry { label: "P~".into(), from: x, to: x + 1 });
            }
            entries.push((x, x + 1, up / &d));
        }
    }
    StochasticKernel::from_off_diagonal(format!("Ptilde_{n}"), states, entries)
}

/// The ordering of `V` along which the jump-two kernel is birth-and-death.
///
/// Even `N`: `N-3, N-5, ..., 1, 0, 2, ..., N-2, N`.
/// Odd `N`: `N-3, N-5, ..., 2, 0, 1, 3, ..., N-2, N`.
pub fn hat_ordering(n: usize) -> Vec<u64> {
    assert!(n >= 2, "hat ordering needs N >= 2");
    let n = n as i64;
    let mut out: Vec<i64> = Vec::with_capacity(n as usize);
    // descending run of the parity of N-3, ending at its smallest member
    let mut x = n - 3;
    while x >= 0 {
        out.push(x);
        x -= 2;
    }
    let ascending_start = if out.last() == Some(&0) { 1 } else { 0 };
    if ascending_start == 1 {
        // descending run ended at 0; ascending run covers the other parity
        let mut y = 1;
        while y <= n - 2 {
            out.push(y);
            y += 2;
        }
    } else {
        let mut y = 0;
        while y <= n - 2 {
            out.push(y);
            y += 2;
        }
    }
    out.push(n);
    out.into_iter().map(|v| v as u64).collect()
}

/// Birth-and-death kernel on positions `0..N-1` of [`hat_ordering`]:
/// `P^(i, i+-1) = P(z_i, z_{i+-1})`.
pub fn build_hat(p: &PFunction) -> Result<StochasticKernel<BigRational>> {
    let n = p.n();
    let penta = build_penta(p)?;
    let z = hat_ordering(n);
    let states: Vec<i64> = (0..z.len() as i64).collect();
    let mut entries = Vec::new();
    for i in 0..z.len() {
        for j in [i.wrapping_sub(1), i + 1] {
            if j < z.len() {
                let w = penta.get(z[i] as i64, z[j] as i64);
                entries.push((i as i64, j as i64, w));
            }
        }
    }
    StochasticKernel::from_off_diagonal(format!("Phat_{n}"), states, entries)
}

/// `pi^(i) = pi(z_i)` on positions of [`hat_ordering`].
pub fn hat_stationary(pi: &Dist<BigRational>, n: usize) -> Result<Dist<BigRational>> {
    let z = hat_ordering(n);
    let weights = z.iter().map(|&x| pi.pmf(x)).collect();
    Dist::new(format!("pihat_{n}"), (0..z.len() as u64).collect(), weights)
}

/// The three birth-and-death kernels on `[0, N-4]`.
#[derive(Clone, Debug)]
pub struct RestrictedKernels {
    /// Up-rate `N - x - 2p(x)`; stationary law is `pi` conditioned on `[0, N-4]`.
    pub check: StochasticKernel<BigRational>,
    /// Up-rate `N - x - 1`; stationary law is Poisson(1) conditioned on `[0, N-4]`.
    pub r: StochasticKernel<BigRational>,
    /// Up-rate `N - x - 1/2`.
    pub r_tilde: StochasticKernel<BigRational>,
}

/// Birth-and-death kernel on `[0, m]` with down-rate `x(N-x)` and the given
/// up-rates, both over `N(N-1)`.
pub fn birth_death_kernel(
    label: impl Into<String>,
    n: usize,
    m: usize,
    up_rate: impl Fn(usize) -> BigRational,
) -> Result<StochasticKernel<BigRational>> {
    let d = denominator(n);
    let states: Vec<i64> = (0..=m as i64).collect();
    let mut entries = Vec::new();
    for x in 0..=m {
        if x > 0 {
            entries.push((x as i64, x as i64 - 1, int((x * (n - x)) as i64) / &d));
        }
        if x < m {
            entries.push((x as i64, x as i64 + 1, up_rate(x) / &d));
        }
    }
    StochasticKernel::from_off_diagonal(label, states, entries)
}

pub fn build_restricted(p: &PFunction) -> Result<RestrictedKernels> {
    let n = p.n();
    if n < 5 {
        return Err(Error::InvalidArgument("restricted kernels need N >= 5".into()));
    }
    let m = n - 4;
    let check = birth_death_kernel(format!("Pcheck_{n}"), n, m, |x| {
        int((n - x) as i64) - int(2) * p.at(x as u64)
    })?;
    Ok(RestrictedKernels { check, r: build_r(n)?, r_tilde: build_r_tilde(n)? })
}

/// `R` on `[0, N-4]`: up-rate `N - x - 1`.
pub fn build_r(n: usize) -> Result<StochasticKernel<BigRational>> {
    if n < 5 {
        return Err(Error::InvalidArgument("R needs N >= 5".into()));
    }
    birth_death_kernel(format!("R_{n}"), n, n - 4, |x| int((n - x - 1) as i64))
}

/// `R~` on `[0, N-4]`: up-rate `N - x - 1/2`.
pub fn build_r_tilde(n: usize) -> Result<StochasticKernel<BigRational>> {
    if n < 5 {
        return Err(Error::InvalidArgument("R~ needs N >= 5".into()));
    }
    birth_death_kernel(format!("Rtilde_{n}"), n, n - 4, |x| int((n - x) as i64) - rat(1, 2))
}

/// The penta-diagonal kernel with `p` replaced by 1/2, on `[0, N]`.
///
/// Moves that would leave `[0, N]` or enter `N` from `N-1` are suppressed,
/// which keeps Poisson(1) conditioned on `[0, N]` reversible.
pub fn poisson_reversible_kernel(n: usize) -> Result<StochasticKernel<BigRational>> {
    if n < 2 {
        return Err(Error::InvalidArgument("Poisson-reversible kernel needs N >= 2".into()));
    }
    let d = denominator(n);
    let ni = n as i64;
    let states: Vec<i64> = (0..=ni).collect();
    let mut entries = Vec::new();
    for x in 0..=ni {
        let moves = [
            (x - 1, x * (ni - x)),
            (x - 2, x * (x - 1)),
            (x + 1, ni - x - 1),
            (x + 2, 1),
        ];
        for (y, w) in moves {
            if w > 0 && (0..=ni).contains(&y) && !(x == ni - 1 && y == ni) {
                entries.push((x, y, int(w) / &d));
            }
        }
    }
    StochasticKernel::from_off_diagonal(format!("Pbar_{n}"), states, entries)
}

/// Stationary law of a positional birth-and-death kernel from the
/// detailed-balance ratios `mu(i+1)/mu(i) = K(i,i+1)/K(i+1,i)`.
pub fn birth_death_stationary<T: Scalar>(k: &StochasticKernel<T>, label: impl Into<String>) -> Result<Dist<T>> {
    let label = label.into();
    if k.positional_bandwidth() > 1 {
        return Err(Error::InvalidKernel { label, reason: "not birth-and-death".into() });
    }
    if k.states().iter().any(|&s| s < 0) || k.states().windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidKernel { label, reason: "states must be increasing and non-negative".into() });
    }
    let mut masses = vec![T::one()];
    for i in 0..k.len() - 1 {
        let down = k.at(i + 1, i);
        if is_zero(&down) {
            return Err(Error::InvalidKernel { label, reason: format!("reducible at position {i}") });
        }
        let next = masses[i].clone() * k.at(i, i + 1) / down;
        masses.push(next);
    }
    let support = k.states().iter().map(|&s| s as u64).collect();
    Dist::from_masses(label, support, masses)
}

/// Kind of reversibility failure.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    DetailedBalance,
    KolmogorovCycle,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Violation<T> {
    pub kind: ViolationKind,
    /// State ids involved (two for detailed balance, three for a cycle).
    pub states: Vec<i64>,
    /// `d(x)K(x,y) - d(y)K(y,x)`, or the difference of the two cycle products.
    pub residual: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReversibilityReport<T> {
    pub pairs_checked: usize,
    pub cycles_checked: usize,
    pub detailed_balance: bool,
    pub kolmogorov: bool,
    pub first_violation: Option<Violation<T>>,
}

impl<T> ReversibilityReport<T> {
    pub fn passed(&self) -> bool {
        self.detailed_balance && self.kolmogorov
    }
}

/// Detailed balance `d(x)K(x,y) = d(y)K(y,x)` on every pair, plus the
/// Kolmogorov identity on every triangle `{x, x+1, x+2}` of state ids.
///
/// Every state of `k` must carry positive weight under `d`.
pub fn check_reversibility<T: Scalar>(k: &StochasticKernel<T>, d: &Dist<T>) -> Result<ReversibilityReport<T>> {
    let w = k.weights_of(d);
    if let Some(i) = w.iter().position(|v| *v <= T::zero()) {
        return Err(Error::ZeroWeightState { state: k.states()[i] });
    }
    let mut report = ReversibilityReport {
        pairs_checked: 0,
        cycles_checked: 0,
        detailed_balance: true,
        kolmogorov: true,
        first_violation: None,
    };
    for i in 0..k.len() {
        for (j, v) in k.row(i) {
            let j = *j;
            if j == i {
                continue;
            }
            let back = k.at(j, i);
            // each unordered pair once; pairs with a zero forward entry are
            // visited from the other side
            if j < i && !is_zero(&back) {
                continue;
            }
            report.pairs_checked += 1;
            let lhs = w[i].clone() * v.clone();
            let rhs = w[j].clone() * back;
            if !lhs.close_to(&rhs) {
                report.detailed_balance = false;
                if report.first_violation.is_none() {
                    report.first_violation = Some(Violation {
                        kind: ViolationKind::DetailedBalance,
                        states: vec![k.states()[i], k.states()[j]],
                        residual: lhs - rhs,
                    });
                }
            }
        }
    }
    for &x in k.states() {
        let (Some(a), Some(b), Some(c)) = (k.index_of(x), k.index_of(x + 1), k.index_of(x + 2)) else {
            continue;
        };
        report.cycles_checked += 1;
        let forward = k.at(a, b) * k.at(b, c) * k.at(c, a);
        let backward = k.at(a, c) * k.at(c, b) * k.at(b, a);
        if !forward.close_to(&backward) {
            report.kolmogorov = false;
            if report.first_violation.is_none() {
                report.first_violation = Some(Violation {
                    kind: ViolationKind::KolmogorovCycle,
                    states: vec![x, x + 1, x + 2],
                    residual: forward - backward,
                });
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactdist::{fixed_point_pmf, poisson_truncated};

    const GUARD: Guard = Guard::new(P_BRUTEFORCE_GUARD);

    #[test]
    fn p_examples() {
        let p4 = p_bruteforce(4, GUARD).unwrap();
        // 3 double transpositions among 9 derangements of S_4
        assert_eq!(p4.at(0), &rat(2, 3));
        assert_eq!(p4.at(2), &int(1));
        assert_eq!(p4.at(4), &int(0));
        let p5 = p_bruteforce(5, GUARD).unwrap();
        assert_eq!(p5.at(2), &int(0));
        assert_eq!(p_closedform(4).unwrap().at(0), &rat(2, 3));
        assert_eq!(p_recursion(4).unwrap().at(0), &rat(2, 3));
    }

    #[test]
    fn small_n_closed_forms() {
        let p2 = p_closedform(2).unwrap();
        assert_eq!(p2.states(), &[0, 2]);
        assert_eq!(p2.at(0), &int(1));
        let p3 = p_closedform(3).unwrap();
        assert_eq!(p3.at(0), &int(0));
        assert_eq!(p3.at(1), &int(1));
        for n in 1..=3 {
            assert!(p_bruteforce(n, GUARD).unwrap().same_values(&p_closedform(n).unwrap()));
        }
    }

    #[test]
    fn bruteforce_guard() {
        assert!(matches!(p_bruteforce(9, GUARD), Err(Error::GuardExceeded { .. })));
    }

    #[test]
    fn fixed_point_of_recursion_map() {
        for n in 4..=20 {
            for x in 0..=n - 4 {
                assert_eq!(recursion_map(n, x, &int(1)), Some(int(1)));
            }
        }
        assert_eq!(recursion_map(5, 0, &int(16)), None);
    }

    #[test]
    fn invariants_and_bounds_through_30() {
        for n in 4..=30 {
            let p = p_recursion(n).unwrap();
            assert!(p.check_invariants(), "N={n}");
            assert!(p.sign_alternation_holds(), "N={n}");
            assert!(p.factorial_bound_holds(), "N={n}");
            assert!(p.derangement_bound_holds(), "N={n}");
            assert!(p.quarter_bounds_hold(), "N={n}");
        }
    }

    #[test]
    fn penta_examples() {
        let p = p_closedform(4).unwrap();
        let k = build_penta(&p).unwrap();
        assert_eq!(k.get(4, 2), int(1));
        assert_eq!(k.get(2, 4), rat(1, 6));
        assert_eq!(k.get(2, 3), int(0));
        assert_eq!(k.value_bandwidth(), 2);
        let pi = fixed_point_pmf(4).unwrap();
        assert!(check_reversibility(&k, &pi).unwrap().passed());
        assert!(k.is_stationary(&pi));
    }

    #[test]
    fn projected_penta_doubles_unit_moves() {
        for n in 3..=10 {
            let p = p_closedform(n).unwrap();
            let (a, b) = (build_penta(&p).unwrap(), build_penta_projected(&p).unwrap());
            for &x in a.states() {
                for y in [x - 2, x - 1, x + 1, x + 2] {
                    let factor = if (x - y).abs() == 1 { int(2) } else { int(1) };
                    assert_eq!(b.get(x, y), factor * a.get(x, y));
                }
            }
            let pi = fixed_point_pmf(n).unwrap();
            assert!(check_reversibility(&b, &pi).unwrap().passed());
        }
        let k = build_penta_projected(&p_closedform(4).unwrap()).unwrap();
        assert_eq!(k.get(2, 1), rat(2, 3));
        assert_eq!(k.get(2, 2), int(0));
    }

    #[test]
    fn penta_rejects_bad_p() {
        let mut p = p_closedform(6).unwrap();
        p.values[1] = int(4);
        assert!(matches!(build_penta(&p), Err(Error::NegativeEntry { .. })));
    }

    #[test]
    fn tilde_entries() {
        for n in 4..=9 {
            let p = p_closedform(n).unwrap();
            let k = build_tilde(&p).unwrap();
            let ni = n as i64;
            assert_eq!(k.get(ni - 2, ni), rat(2, ni * (ni - 1)));
            assert_eq!(k.get(ni, ni - 2), int(1));
            assert!(k.positional_bandwidth() <= 1);
            let pi = fixed_point_pmf(n).unwrap();
            assert!(check_reversibility(&k, &pi).unwrap().passed());
        }
    }

    #[test]
    fn hat_orderings() {
        assert_eq!(hat_ordering(6), vec![3, 1, 0, 2, 4, 6]);
        assert_eq!(hat_ordering(7), vec![4, 2, 0, 1, 3, 5, 7]);
        assert_eq!(hat_ordering(4), vec![1, 0, 2, 4]);
        for n in 2..=12 {
            let mut z = hat_ordering(n);
            z.sort_unstable();
            assert_eq!(z, state_space(n));
        }
    }

    #[test]
    fn hat_kernel_is_reversible() {
        for n in 4..=12 {
            let p = p_closedform(n).unwrap();
            let k = build_hat(&p).unwrap();
            assert_eq!(k.positional_bandwidth(), 1);
            let pihat = hat_stationary(&fixed_point_pmf(n).unwrap(), n).unwrap();
            assert!(check_reversibility(&k, &pihat).unwrap().passed(), "N={n}");
        }
    }

    #[test]
    fn restricted_kernels() {
        for n in 5..=12 {
            let p = p_closedform(n).unwrap();
            let ks = build_restricted(&p).unwrap();
            let zeta = poisson_truncated(n - 4).unwrap();
            assert!(check_reversibility(&ks.r, &zeta).unwrap().passed());
            let pi_check = fixed_point_pmf(n).unwrap().condition_at_most(n as u64 - 4, "pi_check").unwrap();
            let solved = birth_death_stationary(&ks.check, "solved").unwrap();
            assert_eq!(solved.weights(), pi_check.weights());
            assert!(check_reversibility(&ks.check, &pi_check).unwrap().passed());
            assert_eq!(birth_death_stationary(&ks.r, "z").unwrap().weights(), zeta.weights());
            assert_eq!(ks.r_tilde.get(0, 1), rat(2 * n as i64 - 1, 2 * (n * (n - 1)) as i64));
        }
    }

    #[test]
    fn poisson_reversible_full_kernel() {
        for n in 2..=12 {
            let k = poisson_reversible_kernel(n).unwrap();
            let pois = poisson_truncated(n).unwrap();
            assert!(check_reversibility(&k, &pois).unwrap().passed(), "N={n}");
        }
    }

    #[test]
    fn perturbed_kernel_fails_with_location() {
        let n = 8;
        let k = birth_death_kernel("bad", n, 4, |x| {
            if x == 2 {
                int((n - x) as i64)
            } else {
                int((n - x - 1) as i64)
            }
        })
        .unwrap();
        let zeta = poisson_truncated(4).unwrap();
        let report = check_reversibility(&k, &zeta).unwrap();
        assert!(!report.detailed_balance);
        let v = report.first_violation.unwrap();
        assert_eq!(v.kind, ViolationKind::DetailedBalance);
        assert_eq!(v.states, vec![2, 3]);
        // zeta(2) * 1 / 56
        assert_eq!(v.residual, zeta.pmf(2) * rat(1, 56));
    }

    #[test]
    fn zero_weight_states_rejected() {
        let k = build_penta(&p_closedform(5).unwrap()).unwrap();
        let d = Dist::new("d", vec![0], vec![int(1)]).unwrap();
        assert!(matches!(check_reversibility(&k, &d), Err(Error::ZeroWeightState { .. })));
    }

    #[test]
    fn double_mode_rounds_once() {
        let k = build_penta(&p_closedform(7).unwrap()).unwrap();
        let kf: StochasticKernel<f64> = k.to_scalar();
        assert_eq!(kf.get(3, 5), <f64 as Scalar>::from_rational(&k.get(3, 5)));
        let pi = fixed_point_pmf(7).unwrap().to_scalar::<f64>();
        assert!(check_reversibility(&kf, &pi).unwrap().passed());
    }
}
