//! Projection of a chain along a partition of its state space, the
//! transposition walk on `S_N`, and the cycle-type chain it induces.

use std::collections::{BTreeMap, HashMap};

use num_bigint::BigInt;
use num_rational::BigRational;
use rayon::prelude::*;

use crate::combin::{binomial, factorial, rat};
use crate::error::{Error, Result};
use crate::exactdist::Dist;
use crate::kernels::{check_reversibility, ReversibilityReport, StochasticKernel};
use crate::perm::{all_cycle_types, all_permutations, CycleType, Guard};
use crate::scalar::{is_zero, Scalar};

/// Default guard for anything enumerating `S_N` here.
pub const LUMPING_GUARD: usize = 8;

/// A chain `Q` on `W` with invariant law `mu` and a partition of `W` into
/// blocks `A_v`.
#[derive(Clone, Debug)]
pub struct PartitionedChain<T> {
    kernel: StochasticKernel<T>,
    mu: Dist<T>,
    block_of: Vec<usize>,
    block_ids: Vec<i64>,
}

impl<T: Scalar> PartitionedChain<T> {
    /// `blocks[i]` is the block id of the `i`-th state of `kernel`. Block ids
    /// become the projected state list, in increasing order.
    pub fn new(kernel: StochasticKernel<T>, mu: Dist<T>, blocks: &[i64]) -> Result<Self> {
        let label = kernel.label().to_string();
        let states: Vec<u64> = kernel.states().iter().map(|&s| s.max(-1) as u64).collect();
        if kernel.states().iter().any(|&s| s < 0) || states != mu.support() {
            return Err(Error::InvalidKernel { label, reason: "invariant law must be indexed by the state list".into() });
        }
        if blocks.len() != kernel.len() {
            return Err(Error::InvalidKernel { label, reason: "one block id per state is required".into() });
        }
        let mu_q = kernel.left_apply(mu.weights());
        if !mu_q.iter().zip(mu.weights()).all(|(a, b)| a.close_to(b)) {
            return Err(Error::InvalidKernel { label, reason: "law is not invariant".into() });
        }
        let mut block_ids = blocks.to_vec();
        block_ids.sort_unstable();
        block_ids.dedup();
        let pos: HashMap<i64, usize> = block_ids.iter().enumerate().map(|(i, &b)| (b, i)).collect();
        let block_of = blocks.iter().map(|b| pos[b]).collect();
        Ok(Self { kernel, mu, block_of, block_ids })
    }

    pub fn kernel(&self) -> &StochasticKernel<T> {
        &self.kernel
    }

    pub fn invariant(&self) -> &Dist<T> {
        &self.mu
    }

    pub fn block_ids(&self) -> &[i64] {
        &self.block_ids
    }

    /// Block position of each state, positionally.
    pub fn block_of(&self) -> &[usize] {
        &self.block_of
    }

    pub fn block_count(&self) -> usize {
        self.block_ids.len()
    }

    /// `mu(A_v)` for every block.
    pub fn block_masses(&self) -> Vec<T> {
        let mut out = vec![T::zero(); self.block_count()];
        for (w, m) in self.mu.weights().iter().enumerate() {
            let b = self.block_of[w];
            out[b] = out[b].clone() + m.clone();
        }
        out
    }

    /// `Q(w, A_v')` for every state `w` and block `v'`.
    fn aggregated_rows(&self) -> Vec<Vec<T>> {
        self.kernel
            .rows()
            .iter()
            .map(|row| {
                let mut agg = vec![T::zero(); self.block_count()];
                for (j, v) in row {
                    let b = self.block_of[*j];
                    agg[b] = agg[b].clone() + v.clone();
                }
                agg
            })
            .collect()
    }
}

/// Output of [`project`].
#[derive(Clone, Debug)]
pub struct Projection<T> {
    pub kernel: StochasticKernel<T>,
    /// `Lambda(w, v) = mu(A_v)`, dense, rows indexed by `W`.
    pub lambda: Vec<Vec<T>>,
    pub mu1: Dist<T>,
    /// `Q Lambda = Lambda P` entrywise.
    pub intertwining: bool,
    /// `mu1 P = mu1`.
    pub mu1_invariant: bool,
}

/// `P(v,v') = sum_{w in A_v} (mu(w)/mu(A_v)) Q(w, A_v')`.
pub fn project<T: Scalar>(chain: &PartitionedChain<T>) -> Result<Projection<T>> {
    let masses = chain.block_masses();
    if let Some(b) = masses.iter().position(is_zero) {
        return Err(Error::ZeroMassBlock { block: chain.block_ids[b] });
    }
    let nb = chain.block_count();
    let agg = chain.aggregated_rows();
    let mut p = vec![vec![T::zero(); nb]; nb];
    for (w, row) in agg.iter().enumerate() {
        let v = chain.block_of[w];
        let weight = chain.mu.weights()[w].clone() / masses[v].clone();
        for (b, q) in row.iter().enumerate() {
            if !is_zero(q) {
                p[v][b] = p[v][b].clone() + weight.clone() * q.clone();
            }
        }
    }
    let rows = p
        .into_iter()
        .map(|r| r.into_iter().enumerate().filter(|(_, v)| !is_zero(v)).collect())
        .collect();
    let label = format!("proj({})", chain.kernel.label());
    let kernel = StochasticKernel::new(label.clone(), chain.block_ids.clone(), rows)?;

    let lambda: Vec<Vec<T>> = vec![masses.clone(); chain.kernel.len()];
    // (Q Lambda)(w, v) and (Lambda P)(w, v)
    let lambda_p: Vec<T> = (0..nb)
        .map(|v| (0..nb).fold(T::zero(), |acc, u| acc + masses[u].clone() * kernel.at(u, v)))
        .collect();
    let intertwining = chain.kernel.rows().iter().all(|row| {
        (0..nb).all(|v| {
            let q_lambda = row.iter().fold(T::zero(), |acc, (j, q)| acc + q.clone() * lambda[*j][v].clone());
            q_lambda.close_to(&lambda_p[v])
        })
    });
    let mu1_invariant = lambda_p.iter().zip(&masses).all(|(a, b)| a.close_to(b));
    let support = if chain.block_ids.iter().all(|&b| b >= 0) {
        chain.block_ids.iter().map(|&b| b as u64).collect()
    } else {
        (0..nb as u64).collect()
    };
    let mu1 = Dist::new(format!("mu1({})", chain.mu.label()), support, masses)?;
    Ok(Projection { kernel, lambda, mu1, intertwining, mu1_invariant })
}

#[derive(Clone, Debug)]
pub struct TransferReport<T> {
    pub upstream: ReversibilityReport<T>,
    pub projected: ReversibilityReport<T>,
}

impl<T> TransferReport<T> {
    /// Reversibility upstream implies reversibility downstream.
    pub fn consistent(&self) -> bool {
        !self.upstream.passed() || self.projected.passed()
    }
}

/// Checks `mu` against `Q` and `mu1` against the projected kernel.
pub fn reversibility_transfer<T: Scalar>(chain: &PartitionedChain<T>) -> Result<TransferReport<T>> {
    let proj = project(chain)?;
    Ok(TransferReport {
        upstream: check_reversibility(&chain.kernel, &chain.mu)?,
        projected: check_reversibility(&proj.kernel, &proj.mu1)?,
    })
}

/// `out[v][v']` is true iff `Q(w, A_v')` is the same for every `w` in `A_v`.
pub fn dynkin_check<T: Scalar>(chain: &PartitionedChain<T>) -> Vec<Vec<bool>> {
    let nb = chain.block_count();
    let agg = chain.aggregated_rows();
    let mut reference: Vec<Option<usize>> = vec![None; nb];
    let mut out = vec![vec![true; nb]; nb];
    for (w, row) in agg.iter().enumerate() {
        let v = chain.block_of[w];
        match reference[v] {
            None => reference[v] = Some(w),
            Some(r) => {
                for b in 0..nb {
                    if !row[b].close_to(&agg[r][b]) {
                        out[v][b] = false;
                    }
                }
            }
        }
    }
    out
}

/// The classical lumped kernel `P(v,v') = Q(w, A_v')` for a representative
/// `w` of each block; `None` unless Dynkin's condition holds everywhere.
pub fn classical_lumping<T: Scalar>(chain: &PartitionedChain<T>) -> Result<Option<StochasticKernel<T>>> {
    if !dynkin_check(chain).iter().flatten().all(|&b| b) {
        return Ok(None);
    }
    let agg = chain.aggregated_rows();
    let mut rows = vec![None; chain.block_count()];
    for (w, row) in agg.into_iter().enumerate() {
        let v = chain.block_of[w];
        if rows[v].is_none() {
            rows[v] = Some(row.into_iter().enumerate().filter(|(_, x)| !is_zero(x)).collect::<Vec<_>>());
        }
    }
    let rows = rows.into_iter().map(|r| r.unwrap_or_default()).collect();
    let label = format!("lumped({})", chain.kernel.label());
    StochasticKernel::new(label, chain.block_ids.clone(), rows).map(Some)
}

/// Same state list and entries, labels ignored.
pub fn same_entries<T: Scalar>(a: &StochasticKernel<T>, b: &StochasticKernel<T>) -> bool {
    a.states() == b.states()
        && (0..a.len()).all(|i| {
            let (ra, rb) = (a.row(i), b.row(i));
            ra.len() == rb.len() && ra.iter().zip(rb).all(|(x, y)| x.0 == y.0 && x.1.close_to(&y.1))
        })
}

/// `sigma -> tau o sigma` for a uniform transposition `tau`; states are the
/// lexicographic ranks of permutations.
pub fn transposition_walk(n: usize, guard: Guard) -> Result<StochasticKernel<BigRational>> {
    if n < 2 {
        return Err(Error::InvalidArgument("transposition walk needs N >= 2".into()));
    }
    guard.check(n)?;
    let perms = all_permutations(n);
    let w = rat(2, (n * (n - 1)) as i64);
    let rows: Vec<Vec<(usize, BigRational)>> = perms
        .par_iter()
        .map(|sigma| {
            let mut row = Vec::with_capacity(n * (n - 1) / 2);
            for i in 0..n {
                for j in i + 1..n {
                    row.push((sigma.left_transpose(i, j).rank(), w.clone()));
                }
            }
            row
        })
        .collect();
    let states = (0..perms.len() as i64).collect();
    StochasticKernel::new(format!("T_{n}"), states, rows)
}

/// The uniform law on `S_N`, indexed by rank.
pub fn uniform_on_group(n: usize) -> Result<Dist<BigRational>> {
    let size = factorial(n);
    let count = usize::try_from(&size).map_err(|_| Error::InvalidArgument("N! too large".into()))?;
    let w = BigRational::new(BigInt::from(1), size);
    Dist::new(format!("nu_{n}"), (0..count as u64).collect(), vec![w; count])
}

/// The transposition walk with its uniform law, partitioned by `f(sigma)`.
pub fn group_chain_by(
    n: usize,
    guard: Guard,
    f: impl Fn(&crate::perm::Permutation) -> i64,
) -> Result<PartitionedChain<BigRational>> {
    let t = transposition_walk(n, guard)?;
    let blocks: Vec<i64> = all_permutations(n).iter().map(f).collect();
    PartitionedChain::new(t, uniform_on_group(n)?, &blocks)
}

/// The coagulation-fragmentation chain on cycle types of `N`.
#[derive(Clone, Debug)]
pub struct CycleTypeChain {
    /// State `i` is `types[i]`.
    pub types: Vec<CycleType>,
    /// Kernel on cycle types, class-size law, blocks by number of fixed points.
    pub chain: PartitionedChain<BigRational>,
    /// Dynkin's condition for the cycle-type lumping of the transposition walk.
    pub group_dynkin: bool,
}

/// Transition law from one cycle type by case analysis: a transposition of
/// two points in one `L`-cycle at cyclic distance `d` splits it into `d` and
/// `L-d`; points in cycles of lengths `a` and `b` merge them into `a+b`.
pub fn cycle_type_transitions(ct: &CycleType) -> BTreeMap<CycleType, BigRational> {
    let n = ct.n();
    let lengths = ct.lengths();
    let pairs = binomial(n, 2);
    let mut counts: BTreeMap<CycleType, u64> = BTreeMap::new();
    let with = |drop: &[usize], add: &[usize]| {
        let mut ls = lengths.clone();
        for d in drop {
            let pos = ls.iter().position(|l| l == d).expect("present");
            ls.remove(pos);
        }
        ls.extend_from_slice(add);
        CycleType::from_lengths(n, &ls).expect("same weight")
    };
    for (c, &l) in lengths.iter().enumerate() {
        for d in 1..=l / 2 {
            let pair_count = if 2 * d == l { l / 2 } else { l };
            *counts.entry(with(&[l], &[d, l - d])).or_default() += pair_count as u64;
        }
        for &m in &lengths[c + 1..] {
            *counts.entry(with(&[l, m], &[l + m])).or_default() += (l * m) as u64;
        }
    }
    counts
        .into_iter()
        .map(|(k, c)| (k, BigRational::new(BigInt::from(c), pairs.clone())))
        .collect()
}

/// Builds the cycle-type chain twice, by lumping the transposition walk and
/// by [`cycle_type_transitions`], and fails unless both agree exactly.
pub fn cycle_type_chain(n: usize, guard: Guard) -> Result<CycleTypeChain> {
    if n < 2 {
        return Err(Error::InvalidArgument("cycle-type chain needs N >= 2".into()));
    }
    guard.check(n)?;
    let types = all_cycle_types(n);
    let index: HashMap<CycleType, i64> = types.iter().cloned().enumerate().map(|(i, t)| (t, i as i64)).collect();

    let group = group_chain_by(n, guard, |s| index[&s.cycle_type()])?;
    let group_dynkin = dynkin_check(&group).iter().flatten().all(|&b| b);
    let lumped = project(&group)?;

    let states: Vec<i64> = (0..types.len() as i64).collect();
    let rows = types
        .iter()
        .map(|t| cycle_type_transitions(t).into_iter().map(|(k, v)| (index[&k] as usize, v)).collect())
        .collect();
    let direct = StochasticKernel::new(format!("C_{n}"), states, rows)?;

    for i in 0..direct.len() {
        for j in 0..direct.len() {
            if direct.at(i, j) != lumped.kernel.at(i, j) {
                return Err(Error::ConstructionMismatch { from: types[i].to_string(), to: types[j].to_string() });
            }
        }
    }
    let total = BigRational::from_integer(factorial(n));
    let mu = Dist::new(
        format!("class_{n}"),
        (0..types.len() as u64).collect(),
        types.iter().map(|t| BigRational::from_integer(t.class_size()) / &total).collect(),
    )?;
    if mu.weights() != lumped.mu1.weights() {
        return Err(Error::ConstructionMismatch { from: "class sizes".into(), to: "enumeration".into() });
    }
    let blocks: Vec<i64> = types.iter().map(|t| i64::from(t.fixed_points())).collect();
    let chain = PartitionedChain::new(direct, mu, &blocks)?;
    Ok(CycleTypeChain { types, chain, group_dynkin })
}
