//! Falling-factorial functionals of the fixed-point count, their moments,
//! the Gram matrix on the state space, and the coefficient systems that pin
//! down the conditional expectation of twice the 2-cycle count.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::combin::{binomial, factorial, falling, int, rat};
use crate::error::{Error, Result};
use crate::exactdist::{derangement_alternating_sum, fixed_point_pmf};
use crate::interval::{exp_neg_one, Interval};
use crate::kernels::{p_closedform, state_space};
use crate::perm::{for_each_permutation, Guard, Permutation};

/// Guard for the oracles that enumerate the symmetric group.
pub const MOMENT_GUARD: usize = 8;

/// `F_k(x) = x (x-1) ... (x-k+1)`.
pub fn f_k(x: u64, k: usize) -> BigInt {
    falling(x as i64, k)
}

/// Number of ordered `k`-tuples of distinct fixed points of `sigma`.
pub fn f_k_by_tuples(sigma: &Permutation, k: usize) -> u64 {
    fn count(fixed: &[usize], used: &mut Vec<bool>, left: usize) -> u64 {
        if left == 0 {
            return 1;
        }
        let mut total = 0;
        for i in 0..fixed.len() {
            if !used[i] {
                used[i] = true;
                total += count(fixed, used, left - 1);
                used[i] = false;
            }
        }
        total
    }
    let fixed: Vec<usize> = (0..sigma.len()).filter(|&i| sigma.apply(i) == i).collect();
    count(&fixed, &mut vec![false; fixed.len()], k)
}

/// `E[F_k]` under the fixed-point law.
pub fn falling_moment(n: usize, k: usize) -> Result<BigRational> {
    let law = fixed_point_pmf(n)?;
    Ok(law.entries().map(|(x, w)| int(f_k(x, k)) * w).sum())
}

/// `B_0, ..., B_{k_max}` from the Bell triangle.
pub fn bell_numbers(k_max: usize) -> Vec<BigInt> {
    let mut out = vec![BigInt::one()];
    let mut row = vec![BigInt::one()];
    for _ in 0..k_max {
        let mut next = vec![row.last().expect("non-empty").clone()];
        for v in &row {
            let last = next.last().expect("non-empty").clone();
            next.push(last + v);
        }
        out.push(next[0].clone());
        row = next;
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct RawMoment {
    pub n: usize,
    pub k: usize,
    pub moment: BigRational,
    pub bell: BigInt,
}

impl RawMoment {
    pub fn equal(&self) -> bool {
        self.moment == int(self.bell.clone())
    }

    pub fn discrepancy(&self) -> BigRational {
        &self.moment - int(self.bell.clone())
    }
}

/// `E[X^k]` under the fixed-point law against the Poisson(1) moment `B_k`.
pub fn raw_moment_equality(n: usize, k: usize) -> Result<RawMoment> {
    let law = fixed_point_pmf(n)?;
    let moment = law.entries().map(|(x, w)| int(BigInt::from(x).pow(k as u32)) * w).sum();
    let bell = bell_numbers(k).pop().expect("non-empty");
    Ok(RawMoment { n, k, moment, bell })
}

/// `E[eta_2 F_k]` from the counting argument over ordered tuples.
pub fn eta2_fk(n: usize, k: usize) -> Result<BigRational> {
    if k > n {
        return Err(Error::InvalidArgument(format!("k = {k} exceeds N = {n}")));
    }
    Ok(if k + 2 <= n { rat(1, 2) } else { BigRational::zero() })
}

/// `E[eta_2 F_k]` by enumerating all permutations.
pub fn eta2_fk_bruteforce(n: usize, k: usize, guard: Guard) -> Result<BigRational> {
    guard.check(n)?;
    let mut total = BigInt::zero();
    for_each_permutation(n, |s| {
        let ct = s.cycle_type();
        total += BigInt::from(ct.eta(2)) * f_k(ct.fixed_points() as u64, k);
    });
    Ok(BigRational::new(total, factorial(n)))
}

/// `G_{k,l} = E[F_k F_l]` for `k, l` in the state space.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GramMatrix {
    pub n: usize,
    /// Row and column labels.
    pub index: Vec<u64>,
    pub entries: Vec<Vec<BigInt>>,
}

impl GramMatrix {
    pub fn get(&self, k: u64, l: u64) -> Option<&BigInt> {
        let i = self.index.iter().position(|&v| v == k)?;
        let j = self.index.iter().position(|&v| v == l)?;
        Some(&self.entries[i][j])
    }

    pub fn is_symmetric(&self) -> bool {
        let m = self.index.len();
        (0..m).all(|i| (0..m).all(|j| self.entries[i][j] == self.entries[j][i]))
    }
}

/// Closed-form entry for `k <= l`: `k! sum_{r <= min(k, N-l)} C(l, k-r) / r!`.
pub fn gram_entry(n: usize, k: usize, l: usize) -> BigInt {
    let (k, l) = if k <= l { (k, l) } else { (l, k) };
    let kf = factorial(k);
    (0..=k.min(n - l)).map(|r| &kf / factorial(r) * binomial(l, k - r)).sum()
}

pub fn gram(n: usize) -> Result<GramMatrix> {
    if n == 0 {
        return Err(Error::InvalidArgument("Gram matrix needs N >= 1".into()));
    }
    let index = state_space(n);
    let entries = index
        .iter()
        .map(|&k| index.iter().map(|&l| gram_entry(n, k as usize, l as usize)).collect())
        .collect();
    Ok(GramMatrix { n, index, entries })
}

/// `E[F_k F_l]` by enumerating all permutations.
pub fn gram_bruteforce(n: usize, guard: Guard) -> Result<GramMatrix> {
    guard.check(n)?;
    let index = state_space(n);
    let mut counts = vec![0u64; n + 1];
    for_each_permutation(n, |s| counts[s.fixed_points()] += 1);
    let total = factorial(n);
    let mut entries = Vec::with_capacity(index.len());
    for &k in &index {
        let mut row = Vec::with_capacity(index.len());
        for &l in &index {
            let sum: BigInt = counts
                .iter()
                .enumerate()
                .map(|(x, &c)| BigInt::from(c) * f_k(x as u64, k as usize) * f_k(x as u64, l as usize))
                .sum();
            if !(&sum % &total).is_zero() {
                return Err(Error::ConstructionMismatch { from: "enumeration".into(), to: "integer Gram entry".into() });
            }
            row.push(sum / &total);
        }
        entries.push(row);
    }
    Ok(GramMatrix { n, index, entries })
}

/// Solves `A x = b_j` for each right-hand side by fraction-free elimination.
pub fn bareiss_solve(a: &[Vec<BigInt>], rhs: &[Vec<BigInt>]) -> Result<Vec<Vec<BigRational>>> {
    let m = a.len();
    if a.iter().any(|r| r.len() != m) || rhs.iter().any(|r| r.len() != m) {
        return Err(Error::InvalidArgument("system must be square with matching right-hand sides".into()));
    }
    // augmented rows: [A | b_1 ... b_q]
    let q = rhs.len();
    let mut rows: Vec<Vec<BigInt>> = (0..m)
        .map(|i| a[i].iter().cloned().chain(rhs.iter().map(|b| b[i].clone())).collect())
        .collect();
    let mut prev = BigInt::one();
    for col in 0..m {
        let pivot = (col..m).find(|&r| !rows[r][col].is_zero()).ok_or(Error::SingularMatrix { column: col })?;
        rows.swap(col, pivot);
        for r in col + 1..m {
            for c in col + 1..m + q {
                let v = (&rows[col][col] * &rows[r][c] - &rows[r][col] * &rows[col][c]) / &prev;
                rows[r][c] = v;
            }
            rows[r][col] = BigInt::zero();
        }
        prev = rows[col][col].clone();
    }
    let mut out = Vec::with_capacity(q);
    for j in 0..q {
        let mut x = vec![BigRational::zero(); m];
        for i in (0..m).rev() {
            let mut acc = int(rows[i][m + j].clone());
            for c in i + 1..m {
                acc -= int(rows[i][c].clone()) * &x[c];
            }
            x[i] = acc / int(rows[i][i].clone());
        }
        out.push(x);
    }
    Ok(out)
}

/// Coefficients in the basis `(F_k)_{k in V}` of the conditional expectation
/// `f`, of the constant 1, and of `g = f - 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientSystems {
    pub n: usize,
    pub gram: GramMatrix,
    pub a: Vec<BigRational>,
    pub b: Vec<BigRational>,
    pub c: Vec<BigRational>,
    /// `c` solved directly from its own right-hand side `(0, ..., 0, -1)`.
    pub c_direct: Vec<BigRational>,
    /// `f(x)` for `x` in the state space.
    pub f: Vec<BigRational>,
    /// Whether `f = 2p` on the whole state space.
    pub f_matches_p: bool,
    /// Whether `sum_k b_k F_k` is identically 1.
    pub b_is_one: bool,
    /// `sum_{x <= N-2} |g(x)| / (e x!)`.
    pub functional: Interval,
}

impl CoefficientSystems {
    pub fn passed(&self) -> bool {
        self.f_matches_p && self.b_is_one && self.c == self.c_direct
    }
}

fn reconstruct(index: &[u64], coeffs: &[BigRational], x: u64) -> BigRational {
    index.iter().zip(coeffs).map(|(&k, a)| int(f_k(x, k as usize)) * a).sum()
}

pub fn coefficient_systems(n: usize, digits: u32) -> Result<CoefficientSystems> {
    if n < 4 {
        return Err(Error::InvalidArgument("coefficient systems need N >= 4".into()));
    }
    let g = gram(n)?;
    let m = g.index.len();
    let ones = vec![BigInt::one(); m];
    let mut rhs_a = ones.clone();
    rhs_a[m - 1] = BigInt::zero();
    let mut rhs_c = vec![BigInt::zero(); m];
    rhs_c[m - 1] = -BigInt::one();
    let mut sol = bareiss_solve(&g.entries, &[rhs_a, ones, rhs_c])?.into_iter();
    let (a, b, c_direct) = (sol.next().unwrap(), sol.next().unwrap(), sol.next().unwrap());
    let c: Vec<BigRational> = a.iter().zip(&b).map(|(x, y)| x - y).collect();

    let p = p_closedform(n)?;
    let two = int(2);
    let f: Vec<BigRational> = g.index.iter().map(|&x| reconstruct(&g.index, &a, x)).collect();
    let f_matches_p = g.index.iter().zip(&f).all(|(&x, fx)| *fx == &two * p.at(x));
    let b_is_one = g.index.iter().all(|&x| reconstruct(&g.index, &b, x).is_one());

    let weighted: BigRational = g
        .index
        .iter()
        .zip(&f)
        .filter(|(&x, _)| x + 2 <= n as u64)
        .map(|(&x, fx)| (fx - BigRational::one()).abs() / int(factorial(x as usize)))
        .sum();
    let functional = exp_neg_one(digits).scale(&weighted);
    Ok(CoefficientSystems { n, gram: g, a, b, c, c_direct, f, f_matches_p, b_is_one, functional })
}

/// Checks `|2p(x) - 1| = (N-x-1) / ((N-x)! D_{N-x})` for `x <= N-2`, where
/// `D_m` is the alternating partial sum of `1/l!`, and `1/3 <= D_m <= 1/2`.
pub fn deviation_identity_holds(n: usize) -> Result<bool> {
    let p = p_closedform(n)?;
    let (third, half) = (rat(1, 3), rat(1, 2));
    for &x in p.states() {
        let m = n - x as usize;
        if m < 2 {
            continue;
        }
        let d = derangement_alternating_sum(m) / int(factorial(m));
        let lhs = (int(2) * p.at(x) - BigRational::one()).abs();
        let rhs = int(m as i64 - 1) / (int(factorial(m)) * &d);
        if lhs != rhs || d < third || d > half {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;

    const GUARD: Guard = Guard::new(MOMENT_GUARD);

    #[test]
    fn bell_triangle() {
        let b: Vec<i64> = bell_numbers(7).iter().map(|v| v.try_into().unwrap()).collect();
        assert_eq!(b, vec![1, 1, 2, 5, 15, 52, 203, 877]);
    }

    #[test]
    fn falling_moments_are_one() {
        for n in 1..=12 {
            for k in 0..=n {
                assert!(falling_moment(n, k).unwrap().is_one(), "N={n} k={k}");
            }
        }
        assert!(falling_moment(4, 5).unwrap().is_zero());
    }

    #[test]
    fn raw_moments() {
        let r = raw_moment_equality(4, 2).unwrap();
        assert_eq!((r.moment.clone(), r.equal()), (int(2), true));
        let r = raw_moment_equality(4, 4).unwrap();
        assert_eq!((r.moment.clone(), r.bell.clone()), (int(15), BigInt::from(15)));
        let r = raw_moment_equality(4, 5).unwrap();
        assert!(!r.equal());
        assert!(!r.discrepancy().is_zero());
    }

    #[test]
    fn eta2_values_agree_with_enumeration() {
        assert_eq!(eta2_fk(5, 0).unwrap(), rat(1, 2));
        assert!(eta2_fk(5, 4).unwrap().is_zero());
        for n in 2..=7 {
            for k in 0..=n {
                assert_eq!(eta2_fk(n, k).unwrap(), eta2_fk_bruteforce(n, k, GUARD).unwrap(), "N={n} k={k}");
            }
        }
        assert!(eta2_fk_bruteforce(9, 0, GUARD).is_err());
    }

    #[test]
    fn gram_closed_form_matches_enumeration() {
        assert_eq!(gram_entry(5, 0, 0), BigInt::one());
        assert_eq!(gram_entry(5, 1, 1), BigInt::from(2));
        for n in 2..=7 {
            let g = gram(n).unwrap();
            assert!(g.is_symmetric());
            assert!(g.index.iter().all(|&l| g.get(0, l).unwrap().is_one()));
            assert_eq!(g, gram_bruteforce(n, GUARD).unwrap(), "N={n}");
        }
    }

    #[test]
    fn f_k_matches_tuple_count() {
        for n in 1..=6 {
            for_each_permutation(n, |s| {
                for k in 0..=n {
                    assert_eq!(BigInt::from(f_k_by_tuples(s, k)), f_k(s.fixed_points() as u64, k));
                }
            });
        }
    }

    #[test]
    fn bareiss_small() {
        let a = vec![vec![BigInt::from(0), BigInt::from(2)], vec![BigInt::from(3), BigInt::from(1)]];
        let x = bareiss_solve(&a, &[vec![BigInt::from(4), BigInt::from(5)]]).unwrap();
        assert_eq!(x[0], vec![int(1), int(2)]);
        let singular = vec![vec![BigInt::from(1), BigInt::from(2)], vec![BigInt::from(2), BigInt::from(4)]];
        assert!(matches!(
            bareiss_solve(&singular, &[vec![BigInt::one(), BigInt::one()]]),
            Err(Error::SingularMatrix { column: 1 })
        ));
    }

    #[test]
    fn coefficients_reconstruct_p() {
        for n in 4..=10 {
            let s = coefficient_systems(n, 30).unwrap();
            assert!(s.passed(), "N={n}");
            let i = s.gram.index.iter().position(|&x| x == n as u64 - 2).unwrap();
            assert_eq!(s.f[i], int(2));
            assert!(s.functional.certainly_positive());
        }
    }

    #[test]
    fn deviation_identity() {
        for n in 3..=14 {
            assert!(deviation_identity_holds(n).unwrap(), "N={n}");
        }
    }
}
