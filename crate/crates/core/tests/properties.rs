use num_bigint::BigInt;
use num_rational::BigRational;
use permfix_core::altcouplings::{AscentPeakSample, MallowsSample};
use permfix_core::combin::{int, rat};
use permfix_core::coupling::Thresholds;
use permfix_core::exactdist::tv_distance;
use permfix_core::io::{DistJson, KernelJson};
use permfix_core::kernels::{birth_death_stationary, build_r, check_reversibility};
use permfix_core::moments::{bareiss_solve, gram};
use permfix_core::rng::replica_rng;
use permfix_core::{Dist, ExactKernel, StochasticKernel, TvConvention};
use proptest::prelude::*;

fn exact_dist(masses: &[u32]) -> Dist<BigRational> {
    let support = (0..masses.len() as u64).collect();
    let w = masses.iter().map(|&m| int(m)).collect();
    Dist::from_masses("d", support, w).unwrap()
}

/// A birth-death kernel on `0..=m` with the given positive rates, scaled so
/// every row sums to at most one.
fn birth_death(up: &[u32], down: &[u32]) -> ExactKernel {
    let m = up.len();
    let scale = int(2 * (up.iter().chain(down).max().copied().unwrap_or(1) as i64 + 1));
    let mut rows = Vec::new();
    for x in 0..=m {
        let mut row = Vec::new();
        let mut out = BigRational::from_integer(0.into());
        if x > 0 {
            let d = int(down[x - 1]) / &scale;
            out += &d;
            row.push((x - 1, d));
        }
        let u = if x < m { int(up[x]) / &scale } else { int(0) };
        out += &u;
        row.push((x, int(1) - out));
        if x < m {
            row.push((x + 1, u));
        }
        rows.push(row);
    }
    StochasticKernel::new("bd", (0..=m as i64).collect(), rows).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn total_is_twice_half(a in prop::collection::vec(0u32..20, 1..8), b in prop::collection::vec(0u32..20, 1..8)) {
        prop_assume!(a.iter().any(|&v| v > 0) && b.iter().any(|&v| v > 0));
        let (d1, d2) = (exact_dist(&a), exact_dist(&b));
        let half = tv_distance(&d1, &d2, TvConvention::Half);
        let total = tv_distance(&d1, &d2, TvConvention::Total);
        prop_assert_eq!(total, int(2) * half);
    }

    #[test]
    fn birth_death_chains_are_reversible(rates in prop::collection::vec((1u32..9, 1u32..9), 1..7)) {
        let (up, down): (Vec<u32>, Vec<u32>) = rates.into_iter().unzip();
        let k = birth_death(&up, &down);
        let law = birth_death_stationary(&k, "stat").unwrap();
        prop_assert!(k.is_stationary(&law));
        prop_assert!(check_reversibility(&k, &law).unwrap().passed());
    }

    #[test]
    fn json_round_trips(masses in prop::collection::vec(0u32..50, 1..10), rates in prop::collection::vec((1u32..9, 1u32..9), 1..5)) {
        prop_assume!(masses.iter().any(|&v| v > 0));
        let d = exact_dist(&masses);
        let j: DistJson = serde_json::from_str(&serde_json::to_string(&DistJson::from_dist(&d, None)).unwrap()).unwrap();
        prop_assert_eq!(j.to_dist().unwrap(), d);
        let (up, down): (Vec<u32>, Vec<u32>) = rates.into_iter().unzip();
        let k = birth_death(&up, &down);
        let kj: KernelJson = serde_json::from_str(&serde_json::to_string(&KernelJson::from_kernel(&k)).unwrap()).unwrap();
        prop_assert_eq!(kj.to_kernel().unwrap(), k);
    }

    #[test]
    fn shared_uniforms_preserve_order(n in 6usize..24, x in 0usize..20, gap in 0usize..20, u in 0.0f64..1.0) {
        let th = Thresholds::<f64>::from_kernel(&build_r(n).unwrap()).unwrap();
        let top = th.len() - 1;
        let (x, y) = (x.min(top), (x + gap).min(top));
        prop_assert!(th.step(x, &u) <= th.step(y, &u));
    }

    #[test]
    fn bareiss_solves_dominant_systems(
        entries in prop::collection::vec(-5i64..6, 16),
        rhs in prop::collection::vec(-9i64..10, 4),
    ) {
        let a: Vec<Vec<BigInt>> = (0..4)
            .map(|i| (0..4).map(|j| BigInt::from(if i == j { 30 } else { entries[4 * i + j] })).collect())
            .collect();
        let b: Vec<BigInt> = rhs.iter().map(|&v| BigInt::from(v)).collect();
        let x = &bareiss_solve(&a, std::slice::from_ref(&b)).unwrap()[0];
        for i in 0..4 {
            let lhs: BigRational = (0..4).map(|j| BigRational::from_integer(a[i][j].clone()) * &x[j]).sum();
            prop_assert_eq!(lhs, BigRational::from_integer(b[i].clone()));
        }
    }

    #[test]
    fn ascent_precedes_peak(values in prop::collection::hash_set(0u64..1_000_000, 3..30)) {
        let v: Vec<u64> = values.into_iter().collect();
        if let Some(s) = AscentPeakSample::from_values(&v) {
            prop_assert!(s.s < s.t);
            prop_assert!(s.m() <= s.s);
            for n in s.t..s.t + 3 {
                prop_assert_eq!(s.m_n(n), s.m());
            }
        }
    }

    #[test]
    fn truncated_bit_sums(seed in 0u64..1000, n in 2u64..40) {
        let s = MallowsSample::draw(n, 50 * n, &mut replica_rng(seed, 0)).unwrap();
        prop_assert!(s.s_n <= s.s_trunc + 1);
        prop_assert!(s.ones.windows(2).all(|w| w[0] < w[1]));
        prop_assert_eq!(s.tail_bound(), rat(1, 50 * n));
    }
}

#[test]
fn gram_rows_start_with_ones() {
    for n in 2..=15 {
        let g = gram(n).unwrap();
        assert!(g.is_symmetric());
        assert!(g.index.iter().all(|&l| g.get(0, l) == Some(&BigInt::from(1))));
    }
}
