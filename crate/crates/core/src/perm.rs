//! Permutations of `{0, ..., N-1}`, cycle types and the enumeration guard.

use std::fmt;

use num_bigint::BigInt;
use serde::{Deserialize, Serialize};

use crate::combin::factorial;
use crate::error::{Error, Result};

/// Environment variable overriding every enumeration guard.
pub const GUARD_ENV: &str = "PERMFIX_GUARD_N";

/// Upper bound on `N` for anything that enumerates `S_N`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Guard {
    pub max_n: usize,
}

impl Guard {
    pub const fn new(max_n: usize) -> Self {
        Self { max_n }
    }

    /// `default`, unless `PERMFIX_GUARD_N` holds a parseable override.
    pub fn from_env_or(default: usize) -> Self {
        let max_n = std::env::var(GUARD_ENV)
            .ok()
            .and_then(|v| v.trim().parse().ok())
            .unwrap_or(default);
        Self { max_n }
    }

    pub fn check(&self, n: usize) -> Result<()> {
        if n > self.max_n {
            Err(Error::GuardExceeded { n, max: self.max_n })
        } else {
            Ok(())
        }
    }
}

/// A permutation stored as its array of images: `sigma(i) = images[i]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Permutation(Vec<u8>);

impl Permutation {
    pub fn identity(n: usize) -> Self {
        Self((0..n as u8).collect())
    }

    pub fn from_images(images: Vec<u8>) -> Result<Self> {
        let mut seen = vec![false; images.len()];
        for &i in &images {
            let i = i as usize;
            if i >= images.len() || seen[i] {
                return Err(Error::InvalidArgument(format!("not a permutation: {images:?}")));
            }
            seen[i] = true;
        }
        Ok(Self(images))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn images(&self) -> &[u8] {
        &self.0
    }

    pub fn apply(&self, i: usize) -> usize {
        self.0[i] as usize
    }

    /// `tau o sigma` for the transposition `tau = (i j)`.
    pub fn left_transpose(&self, i: usize, j: usize) -> Self {
        let images = self
            .0
            .iter()
            .map(|&v| {
                if v as usize == i {
                    j as u8
                } else if v as usize == j {
                    i as u8
                } else {
                    v
                }
            })
            .collect();
        Self(images)
    }

    pub fn fixed_points(&self) -> usize {
        self.0.iter().enumerate().filter(|(i, &v)| *i == v as usize).count()
    }

    /// Lengths of all cycles, fixed points included, by standard marking.
    pub fn cycle_lengths(&self) -> Vec<usize> {
        let n = self.0.len();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            let mut len = 0;
            let mut cur = start;
            while !seen[cur] {
                seen[cur] = true;
                cur = self.0[cur] as usize;
                len += 1;
            }
            out.push(len);
        }
        out
    }

    pub fn cycle_type(&self) -> CycleType {
        let n = self.0.len();
        let mut counts = vec![0u32; n];
        for l in self.cycle_lengths() {
            counts[l - 1] += 1;
        }
        CycleType { counts }
    }

    /// Rank in lexicographic order (Lehmer code).
    pub fn rank(&self) -> usize {
        let n = self.0.len();
        let mut rank = 0usize;
        for i in 0..n {
            let smaller = self.0[i + 1..].iter().filter(|&&v| v < self.0[i]).count();
            rank = rank * (n - i) + smaller;
        }
        rank
    }

    /// Steps to the next permutation in lexicographic order; `false` after
    /// the last one.
    pub fn advance(&mut self) -> bool {
        let v = &mut self.0;
        if v.len() < 2 {
            return false;
        }
        let mut i = v.len() - 1;
        while i > 0 && v[i - 1] >= v[i] {
            i -= 1;
        }
        if i == 0 {
            return false;
        }
        let mut j = v.len() - 1;
        while v[j] <= v[i - 1] {
            j -= 1;
        }
        v.swap(i - 1, j);
        v[i..].reverse();
        true
    }
}

/// All permutations of size `n` in lexicographic order.
pub fn all_permutations(n: usize) -> Vec<Permutation> {
    let mut out = Vec::new();
    let mut cur = Permutation::identity(n);
    loop {
        out.push(cur.clone());
        if !cur.advance() {
            break;
        }
    }
    out
}

/// Visits every permutation of size `n` in lexicographic order.
pub fn for_each_permutation(n: usize, mut f: impl FnMut(&Permutation)) {
    let mut cur = Permutation::identity(n);
    loop {
        f(&cur);
        if !cur.advance() {
            break;
        }
    }
}

/// Cycle type `(eta_1, ..., eta_N)`: `counts[l-1]` cycles of length `l`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CycleType {
    counts: Vec<u32>,
}

impl CycleType {
    pub fn new(counts: Vec<u32>) -> Result<Self> {
        let n = counts.len();
        let total: usize = counts.iter().enumerate().map(|(i, &c)| (i + 1) * c as usize).sum();
        if total != n {
            return Err(Error::InvalidArgument(format!(
                "cycle type {counts:?} has weight {total}, expected {n}"
            )));
        }
        Ok(Self { counts })
    }

    /// Builds a cycle type of `n` from a multiset of cycle lengths.
    pub fn from_lengths(n: usize, lengths: &[usize]) -> Result<Self> {
        let mut counts = vec![0u32; n];
        for &l in lengths {
            if l == 0 || l > n {
                return Err(Error::InvalidArgument(format!("cycle length {l} out of range")));
            }
            counts[l - 1] += 1;
        }
        Self::new(counts)
    }

    pub fn n(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    /// Number of cycles of length `l` (1-based).
    pub fn eta(&self, l: usize) -> u32 {
        self.counts.get(l.wrapping_sub(1)).copied().unwrap_or(0)
    }

    pub fn fixed_points(&self) -> u32 {
        self.eta(1)
    }

    /// Cycle lengths in non-increasing order.
    pub fn lengths(&self) -> Vec<usize> {
        let mut out = Vec::new();
        for (i, &c) in self.counts.iter().enumerate().rev() {
            out.extend(std::iter::repeat_n(i + 1, c as usize));
        }
        out
    }

    /// Conjugacy class size `N! / prod_l (l^eta_l eta_l!)`.
    pub fn class_size(&self) -> BigInt {
        let denom = self.counts.iter().enumerate().fold(BigInt::from(1), |acc, (i, &c)| {
            acc * BigInt::from(i + 1).pow(c) * factorial(c as usize)
        });
        factorial(self.n()) / denom
    }
}

impl fmt::Display for CycleType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.counts.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// Every cycle type of `n`, in reverse-lexicographic order of the partition
/// (the identity's type `(n,0,...)` comes last, the `n`-cycle first).
pub fn all_cycle_types(n: usize) -> Vec<CycleType> {
    fn rec(remaining: usize, max_part: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if remaining == 0 {
            out.push(cur.clone());
            return;
        }
        for part in (1..=max_part.min(remaining)).rev() {
            cur.push(part);
            rec(remaining - part, part, cur, out);
            cur.pop();
        }
    }
    let mut parts = Vec::new();
    rec(n, n, &mut Vec::new(), &mut parts);
    parts
        .into_iter()
        .map(|p| CycleType::from_lengths(n, &p).expect("partition of n"))
        .collect()
}
