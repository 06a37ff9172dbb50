//! One PASS/FAIL line per acceptance criterion. Failing criteria are
//! reported, not hidden; set `PERMFIX_ACCEPTANCE_STRICT=1` to turn any FAIL
//! into a non-zero exit.

use std::time::Instant;

use num_bigint::BigInt;
use permfix_core::altcouplings::{
    ascent_peak_batch, mallows_discrepancy, mallows_exact_pmf, peak_tail_exact, AscentPeakConfig, PEAK_GUARD,
};
use permfix_core::combin::{factorial, rat};
use permfix_core::coupling::{drift_certificate, run_coupling, z_bound, ztilde_bound, DriftVariant, RunConfig, Selector};
use permfix_core::exactdist::{bracket_holds, fixed_point_pmf, log_rate, log_rate_digits, poisson_truncated};
use permfix_core::kernels::{
    build_hat, build_penta, build_restricted, build_tilde, check_reversibility, hat_stationary, p_bruteforce,
    p_closedform, p_recursion, P_BRUTEFORCE_GUARD,
};
use permfix_core::lumping::{cycle_type_chain, project, same_entries, LUMPING_GUARD};
use permfix_core::moments::{coefficient_systems, falling_moment, gram, gram_bruteforce, raw_moment_equality};
use permfix_core::{Guard, Scalar, TvConvention};

struct Outcome {
    ok: bool,
    detail: String,
}

fn outcome(ok: bool, detail: impl Into<String>) -> Outcome {
    Outcome { ok, detail: detail.into() }
}

fn criterion_1() -> Outcome {
    let t = Instant::now();
    let failed: Vec<usize> = (4..=15).filter(|&n| !bracket_holds(n, 50).unwrap()).collect();
    let secs = t.elapsed().as_secs_f64();
    outcome(failed.is_empty() && secs < 5.0, format!("bracket N=4..15 at 50 digits, failures {failed:?}, {secs:.2}s"))
}

fn criterion_2() -> Outcome {
    let t = Instant::now();
    let guard = Guard::new(P_BRUTEFORCE_GUARD);
    let mut bad = Vec::new();
    for n in 4..=30 {
        let p = p_closedform(n).unwrap();
        let mut ok = p.same_values(&p_recursion(n).unwrap());
        if n <= 8 {
            ok &= p.same_values(&p_bruteforce(n, guard).unwrap());
        }
        ok &= p.factorial_bound_holds() && p.derangement_bound_holds() && p.sign_alternation_holds();
        if !ok {
            bad.push(n);
        }
    }
    let secs = t.elapsed().as_secs_f64();
    outcome(bad.is_empty() && secs < 60.0, format!("p agreement and bounds N=4..30, failures {bad:?}, {secs:.1}s"))
}

fn criterion_3() -> Outcome {
    let guard = Guard::new(LUMPING_GUARD);
    let mut intertwining = true;
    let mut stated = Vec::new();
    for n in 2..=7 {
        let ct = cycle_type_chain(n, guard).unwrap();
        let proj = project(&ct.chain).unwrap();
        intertwining &= proj.intertwining;
        if n >= 3 && !same_entries(&proj.kernel, &build_penta(&p_closedform(n).unwrap()).unwrap()) {
            stated.push(n);
        }
    }
    outcome(
        intertwining && stated.is_empty(),
        format!(
            "intertwining N=2..7 {}; projection differs from the stated kernel at N={stated:?} (unit moves off by 2)",
            if intertwining { "holds" } else { "FAILS" }
        ),
    )
}

fn criterion_4() -> Outcome {
    let mut bad = Vec::new();
    for n in 4..=12 {
        let p = p_closedform(n).unwrap();
        let pi = fixed_point_pmf(n).unwrap();
        let mut pairs = vec![
            (build_penta(&p).unwrap(), pi.clone()),
            (build_tilde(&p).unwrap(), pi.clone()),
            (build_hat(&p).unwrap(), hat_stationary(&pi, n).unwrap()),
        ];
        if n >= 5 {
            let ks = build_restricted(&p).unwrap();
            pairs.push((ks.check, pi.condition_at_most(n as u64 - 4, "pi_check").unwrap()));
            pairs.push((ks.r, poisson_truncated(n - 4).unwrap()));
        }
        for (k, law) in &pairs {
            if !check_reversibility(k, law).unwrap().passed() {
                bad.push(format!("{} N={n}", k.label()));
            }
        }
    }
    outcome(bad.is_empty(), format!("five kernel/law pairs N<=12, failures {bad:?}"))
}

fn criterion_5() -> Outcome {
    let mut bad = Vec::new();
    for n in 1..=12 {
        let falling = (0..=n).all(|k| falling_moment(n, k).unwrap() == rat(1, 1));
        let raw = (0..=n).all(|k| raw_moment_equality(n, k).unwrap().equal());
        let differs = !raw_moment_equality(n, n + 1).unwrap().equal();
        if !(falling && raw && differs) {
            bad.push(n);
        }
    }
    outcome(bad.is_empty(), format!("falling = 1, raw = Bell up to N, differ at N+1, N<=12, failures {bad:?}"))
}

fn criterion_6() -> Outcome {
    let guard = Guard::new(7);
    let gram_bad: Vec<usize> = (2..=7).filter(|&n| gram(n).unwrap() != gram_bruteforce(n, guard).unwrap()).collect();
    let coeff_bad: Vec<usize> = (4..=10).filter(|&n| !coefficient_systems(n, 30).unwrap().passed()).collect();
    outcome(
        gram_bad.is_empty() && coeff_bad.is_empty(),
        format!("Gram oracle N<=7 failures {gram_bad:?}; f = 2p N<=10 failures {coeff_bad:?}"),
    )
}

fn criterion_7() -> Outcome {
    let t = Instant::now();
    let (n, h) = (8usize, 100_000u64);
    let s = run_coupling(&RunConfig::new(n, h, 10_000, 20_260_101, Selector::CheckR)).unwrap();
    let c = &s.checkpoints[0];
    let z = c.z_pos.p <= z_bound(n, h) + 3.0 * c.z_pos.sigma;
    let zt = c.ztilde_pos.p <= ztilde_bound(n, h) + 3.0 * c.ztilde_pos.sigma;
    let zh = c.zhat_pos.p <= ztilde_bound(n, h) + 3.0 * c.zhat_pos.sigma;
    let tails = c.tails_hold();
    let rr = run_coupling(&RunConfig::new(n, h, 10_000, 20_260_101, Selector::RR)).unwrap();
    let rr_zero = rr.checkpoints[0].disagree.count == 0 && rr.checkpoints[0].z_pos.count == 0;
    let secs = t.elapsed().as_secs_f64();
    outcome(
        z && zt && zh && tails && rr_zero && secs < 300.0,
        format!(
            "Z {z} (p={}), Z~ {zt}, Z^ {zh}, tails {tails}, (R,R) zero {rr_zero}, {secs:.0}s",
            c.z_pos.p
        ),
    )
}

fn criterion_8() -> Outcome {
    let uncertified: Vec<usize> =
        (10..=200).filter(|&n| !drift_certificate(n, DriftVariant::R, 1).unwrap().certified).collect();
    let n = 10;
    let cert = drift_certificate(n, DriftVariant::R, 1).unwrap();
    let mut cfg = RunConfig::new(n, 100_000, 10_000, 8, Selector::CheckR);
    cfg.checkpoints = vec![1_000, 10_000, 100_000];
    let s = run_coupling(&cfg).unwrap();
    let tails: Vec<(u64, f64, f64)> =
        s.checkpoints.iter().map(|c| (c.n, c.tau0y_gt.p, cert.tail_bound(c.n) * 1.05)).collect();
    let tails_ok = tails.iter().all(|(_, p, b)| p <= b);
    outcome(
        uncertified.is_empty() && tails_ok,
        format!("uncertified N {uncertified:?}; c_est(10) = {:.4}; (n, P[tau0Y>n], bound) {tails:?}", cert.c_est),
    )
}

fn criterion_9() -> Outcome {
    let exact = (1..=12).all(|n| {
        let (a, b) = (mallows_exact_pmf(n).unwrap(), fixed_point_pmf(n).unwrap());
        (0..=n as u64 + 1).all(|x| a.pmf(x) == b.pmf(x))
    });
    let scaled: Vec<f64> = [10u64, 20, 40, 80]
        .iter()
        .map(|&n| n as f64 * mallows_discrepancy(n, 1_000_000, 1000 * n, 9).unwrap().estimate)
        .collect();
    let lo = scaled.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = scaled.iter().cloned().fold(0.0, f64::max);
    let scaling = lo > 0.0 && hi <= 3.0 * lo;

    let ns: Vec<u64> = (1..=8).collect();
    let batch = ascent_peak_batch(&AscentPeakConfig { samples: 1_000_000, seed: 9, ns: ns.clone() });
    let m_tv = batch.m_tv_to_poisson();
    let mn_tv = ns.iter().map(|&n| batch.mn_tv_to(n, &fixed_point_pmf(n as usize).unwrap())).fold(0.0, f64::max);
    let guard = Guard::new(PEAK_GUARD);
    let disagree_ok = ns.iter().all(|&n| {
        let (p, sigma) = batch.disagreement(n);
        p <= peak_tail_exact(n as usize, guard).unwrap().approx() + 3.0 * sigma
    });
    let tail_ok = (1..=10).all(|n| {
        peak_tail_exact(n, guard).unwrap() <= rat(BigInt::from(1u32) << n, factorial(n + 1))
    });
    outcome(
        exact && scaling && m_tv <= 0.005 && mn_tv <= 0.005 && disagree_ok && tail_ok,
        format!(
            "exact law {exact}; N*P[S_N!=S] {scaled:.3?}; half-TV M {m_tv:.5}, max M_N {mn_tv:.5}; \
             M vs M_N {disagree_ok}; peak tails {tail_ok}"
        ),
    )
}

fn criterion_10() -> Outcome {
    let rates: Vec<(usize, f64)> = (10..=50)
        .map(|n| (n, log_rate(n, TvConvention::Total, log_rate_digits(n)).unwrap()))
        .collect();
    let decreasing = rates.windows(2).all(|w| w[1].1 < w[0].1);
    let gaps: Vec<(usize, f64)> = [20usize, 30, 40, 50]
        .iter()
        .map(|&n| {
            let target = -1.0 + (1.0 + std::f64::consts::LN_2) / (n as f64).ln();
            (n, (rates[n - 10].1 - target).abs())
        })
        .collect();
    let close = gaps.iter().all(|(_, g)| *g <= 0.05);
    outcome(
        decreasing && close,
        format!("strictly decreasing {decreasing}; |rate - (-1 + (1+ln2)/ln N)| {gaps:.4?}"),
    )
}

type Criterion = (u32, &'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        (1, "exact bound bracket", criterion_1),
        (2, "triple agreement of p", criterion_2),
        (3, "intertwining and projected kernel", criterion_3),
        (4, "reversibility suites", criterion_4),
        (5, "moments", criterion_5),
        (6, "Gram matrix and coefficients", criterion_6),
        (7, "coupling simulator", criterion_7),
        (8, "drift certificate", criterion_8),
        (9, "alternative couplings", criterion_9),
        (10, "asymptotic rate", criterion_10),
    ];
    let mut failures = 0;
    for (k, name, run) in criteria {
        let t = Instant::now();
        let o = run();
        failures += usize::from(!o.ok);
        println!(
            "{} criterion {k:>2} ({name}): {} [{:.1}s]",
            if o.ok { "PASS" } else { "FAIL" },
            o.detail,
            t.elapsed().as_secs_f64()
        );
    }
    println!("{} of 10 criteria pass", 10 - failures);
    if failures > 0 && std::env::var("PERMFIX_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
