use anyhow::{bail, Result};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use permfix_core::altcouplings::{
    ascent_peak_batch, ascent_peak_exact_law, mallows_discrepancy, mallows_exact_pmf, peak_tail_exact,
    AscentPeakConfig, PEAK_GUARD,
};
use permfix_core::combin::{factorial, rat};
use permfix_core::coupling::{drift_certificate, run_coupling, z_bound, ztilde_bound, DriftVariant, Selector};
use permfix_core::exactdist::{
    half_tv_chain, fixed_point_pmf, log_rate, log_rate_digits, poisson_truncated, separation_to_poisson, tv_bracket,
    tv_to_poisson,
};
use permfix_core::io::{partition_json, DistJson, KernelJson};
use permfix_core::kernels::{
    build_hat, build_penta, build_penta_projected, build_restricted, build_tilde, check_reversibility, hat_stationary,
    p_bruteforce, p_closedform, p_recursion, P_BRUTEFORCE_GUARD,
};
use permfix_core::lumping::{self, cycle_type_chain, dynkin_check, reversibility_transfer, same_entries, LUMPING_GUARD};
use permfix_core::moments::{
    coefficient_systems, deviation_identity_holds, eta2_fk, eta2_fk_bruteforce, falling_moment, gram,
    gram_bruteforce, raw_moment_equality, MOMENT_GUARD,
};
use permfix_core::{Error, ExactKernel, Guard, Interval, Scalar, TvConvention};

use crate::config::Settings;
use crate::report::{Session, Table, Verdict};

fn q(r: &BigRational) -> String {
    r.to_string()
}

fn fl(v: f64) -> String {
    format!("{v}")
}

fn lo_hi(iv: &Interval) -> [String; 2] {
    [fl(iv.lo().approx()), fl(iv.hi().approx())]
}

/// Runs `f` under `guard`, recording a skipped verdict when `n` is too large.
fn guarded<T>(out: &mut Session, name: &str, guard: Guard, n: usize, f: impl FnOnce() -> Result<T>) -> Result<Option<T>> {
    if guard.check(n).is_err() {
        out.verdict(name, Verdict::SkippedGuard);
        return Ok(None);
    }
    f().map(Some)
}

pub fn exact(s: &Settings, out: &mut Session) -> Result<()> {
    let mut pmf = Table::new(&["N", "x", "weight", "value"]);
    let mut summary = Table::new(&[
        "N",
        "tv_total_lo",
        "tv_total_hi",
        "tv_half_lo",
        "tv_half_hi",
        "bracket_lower",
        "bracket_upper",
        "separation_lo",
        "separation_hi",
        "log_rate_total",
        "log_rate_half",
    ]);
    for &n in &s.ns {
        if n == 0 {
            bail!("N must be positive");
        }
        let pi = fixed_point_pmf(n)?;
        for (x, w) in pi.entries().filter(|(_, w)| !w.is_zero()) {
            pmf.push(vec![n.to_string(), x.to_string(), q(w), fl(w.approx())]);
        }
        let total = tv_to_poisson(&pi, TvConvention::Total, s.digits);
        let half = tv_to_poisson(&pi, TvConvention::Half, s.digits);
        let (lo, hi) = tv_bracket(n);
        out.check(format!("bracket N={n}"), total.certainly_ge(&lo) && total.certainly_le(&hi));
        out.check(format!("half_tv_chain N={n}"), half_tv_chain(n, s.digits)?.holds());
        let sep = separation_to_poisson(&pi, s.digits);
        let rate = |c| {
            if n < 4 {
                return Ok(String::new());
            }
            match log_rate(n, c, s.digits.max(log_rate_digits(n))) {
                Ok(v) => Ok(fl(v)),
                Err(Error::PrecisionInsufficient(_)) => Ok(String::new()),
                Err(e) => Err(e),
            }
        };
        let [tl, th] = lo_hi(&total);
        let [hl, hh] = lo_hi(&half);
        let [sl, sh] = lo_hi(&sep);
        summary.push(vec![
            n.to_string(),
            tl,
            th,
            hl,
            hh,
            fl(lo.approx()),
            fl(hi.approx()),
            sl,
            sh,
            rate(TvConvention::Total)?,
            rate(TvConvention::Half)?,
        ]);
        out.json(&format!("laws/pi_{n}.json"), &DistJson::from_dist(&pi, None))?;
    }
    out.table("pmf", &pmf)?;
    out.table("summary", &summary)
}

fn reversibility_row(table: &mut Table, out: &mut Session, n: usize, k: &ExactKernel, law: &permfix_core::ExactDist) -> Result<()> {
    let r = check_reversibility(k, law)?;
    table.push(vec![
        n.to_string(),
        k.label().to_string(),
        r.pairs_checked.to_string(),
        r.cycles_checked.to_string(),
        r.detailed_balance.to_string(),
        r.kolmogorov.to_string(),
    ]);
    out.check(format!("reversible {} N={n}", k.label()), r.passed());
    out.json(&format!("kernels/{}_{n}.json", k.label()), &KernelJson::from_kernel(k))
}

pub fn kernel(s: &Settings, out: &mut Session) -> Result<()> {
    let guard = Guard::from_env_or(P_BRUTEFORCE_GUARD);
    let mut p_table = Table::new(&["N", "x", "p", "deviation", "factorial_bound", "derangement_bound"]);
    let mut rev = Table::new(&["N", "kernel", "pairs", "cycles", "detailed_balance", "kolmogorov"]);
    for &n in &s.ns {
        if n < 4 {
            bail!("kernel needs N >= 4, got {n}");
        }
        let p = p_closedform(n)?;
        out.check(format!("p_recursion_agrees N={n}"), p.same_values(&p_recursion(n)?));
        let brute = guarded(out, &format!("p_bruteforce_agrees N={n}"), guard, n, || Ok(p_bruteforce(n, guard)?))?;
        if let Some(b) = brute {
            out.check(format!("p_bruteforce_agrees N={n}"), p.same_values(&b));
        }
        out.check(format!("p_invariants N={n}"), p.check_invariants());
        out.check(format!("sign_alternation N={n}"), p.sign_alternation_holds());
        out.check(format!("factorial_bound N={n}"), p.factorial_bound_holds());
        out.check(format!("derangement_bound N={n}"), p.derangement_bound_holds());
        out.check(format!("quarter_bounds N={n}"), p.quarter_bounds_hold());
        for r in p.bound_rows() {
            p_table.push(vec![
                n.to_string(),
                r.x.to_string(),
                q(&r.p),
                q(&r.deviation),
                q(&r.factorial_bound),
                q(&r.derangement_bound),
            ]);
        }
        let pi = fixed_point_pmf(n)?;
        reversibility_row(&mut rev, out, n, &build_penta(&p)?, &pi)?;
        reversibility_row(&mut rev, out, n, &build_tilde(&p)?, &pi)?;
        reversibility_row(&mut rev, out, n, &build_hat(&p)?, &hat_stationary(&pi, n)?)?;
        if n >= 5 {
            let ks = build_restricted(&p)?;
            let top = n as u64 - 4;
            reversibility_row(&mut rev, out, n, &ks.check, &pi.condition_at_most(top, "pi_check")?)?;
            reversibility_row(&mut rev, out, n, &ks.r, &poisson_truncated(n - 4)?)?;
        }
    }
    out.table("p", &p_table)?;
    out.table("reversibility", &rev)
}

pub fn project(s: &Settings, out: &mut Session) -> Result<()> {
    let guard = Guard::from_env_or(LUMPING_GUARD);
    let mut types = Table::new(&["N", "state", "cycle_type", "fixed_points", "probability"]);
    let mut summary = Table::new(&["N", "states", "blocks", "dynkin_eta1", "matches_doubled", "matches_stated"]);
    for &n in &s.ns {
        let name = format!("cycle_type_constructions_agree N={n}");
        let Some(built) = guarded(out, &name, guard, n, || Ok(cycle_type_chain(n, guard)))? else {
            continue;
        };
        let ct = match built {
            Err(Error::ConstructionMismatch { .. }) => {
                out.check(name, false);
                continue;
            }
            other => other?,
        };
        out.check(name, true);
        out.check(format!("group_walk_dynkin N={n}"), ct.group_dynkin);
        let proj = lumping::project(&ct.chain)?;
        out.check(format!("intertwining N={n}"), proj.intertwining);
        out.check(format!("mu1_invariant N={n}"), proj.mu1_invariant);
        let pi = fixed_point_pmf(n)?;
        out.check(format!("mu1_is_fixed_point_law N={n}"), (0..=n as u64).all(|x| proj.mu1.pmf(x) == pi.pmf(x)));
        out.check(format!("reversibility_transfers N={n}"), reversibility_transfer(&ct.chain)?.consistent());
        let p = p_closedform(n)?;
        let doubled = same_entries(&proj.kernel, &build_penta_projected(&p)?);
        let stated = same_entries(&proj.kernel, &build_penta(&p)?);
        out.check(format!("projection_matches_doubled_unit_rates N={n}"), doubled);
        out.check(format!("projection_matches_stated_kernel N={n}"), stated);
        let dynkin = dynkin_check(&ct.chain).iter().flatten().all(|&b| b);
        summary.push(vec![
            n.to_string(),
            ct.types.len().to_string(),
            ct.chain.block_count().to_string(),
            dynkin.to_string(),
            doubled.to_string(),
            stated.to_string(),
        ]);
        let total = BigRational::from_integer(factorial(n));
        for (i, t) in ct.types.iter().enumerate() {
            let prob = BigRational::from_integer(t.class_size()) / &total;
            types.push(vec![n.to_string(), i.to_string(), t.to_string(), t.fixed_points().to_string(), q(&prob)]);
        }
        let states = ct.chain.kernel().states().to_vec();
        let blocks: Vec<i64> = ct.types.iter().map(|t| i64::from(t.fixed_points())).collect();
        out.json(&format!("partitions/eta1_{n}.json"), &partition_json(&states, |s| blocks[s as usize]))?;
        out.json(&format!("kernels/cycle_types_{n}.json"), &KernelJson::from_kernel(ct.chain.kernel()))?;
        out.json(&format!("kernels/projected_{n}.json"), &KernelJson::from_kernel(&proj.kernel))?;
    }
    out.table("cycle_types", &types)?;
    out.table("projection", &summary)
}

pub fn couple(s: &Settings, out: &mut Session) -> Result<()> {
    let run = s.run.as_ref().expect("couple settings carry a run config");
    let summary = run_coupling(run)?;
    let n = run.size;
    let mut table = Table::new(&[
        "n", "disagree", "disagree_sigma", "tau_gt", "tau_gt_sigma", "z_pos", "z_pos_sigma", "ztilde_pos",
        "ztilde_pos_sigma", "zhat_pos", "zhat_pos_sigma", "tau0x_gt", "tau0x_gt_sigma", "tau0y_gt", "tau0y_gt_sigma",
        "tails_sum", "tails_radius", "assembled",
    ]);
    let drift = drift_certificate(n, DriftVariant::R, 1)?;
    out.check(format!("drift_certified N={n}"), drift.certified);
    for c in &summary.checkpoints {
        let mut row = vec![c.n.to_string()];
        for e in [&c.disagree, &c.tau_gt, &c.z_pos, &c.ztilde_pos, &c.zhat_pos, &c.tau0x_gt, &c.tau0y_gt] {
            row.push(fl(e.p));
            row.push(fl(e.sigma));
        }
        row.extend([fl(c.tails_sum()), fl(c.tails_radius()), fl(c.assembled())]);
        table.push(row);
        let h = c.n;
        out.check(format!("tail_decomposition n={h}"), c.tails_hold());
        match run.selector {
            Selector::RR => out.check(format!("zero_disagreement n={h}"), c.disagree.count == 0),
            Selector::CheckR => {
                out.check(format!("z_bound n={h}"), c.z_pos.p <= z_bound(n, h) + 3.0 * c.z_pos.sigma);
                out.check(format!("ztilde_bound n={h}"), c.ztilde_pos.p <= ztilde_bound(n, h) + 3.0 * c.ztilde_pos.sigma);
                out.check(format!("zhat_bound n={h}"), c.zhat_pos.p <= ztilde_bound(n, h) + 3.0 * c.zhat_pos.sigma);
                if drift.certified {
                    out.check(format!("tau0y_drift_tail n={h}"), c.tau0y_gt.p <= drift.tail_bound(h) * 1.05);
                }
            }
            Selector::CheckRTilde => {}
        }
    }
    out.table("checkpoints", &table)?;
    let mut lean = summary.clone();
    lean.traces.clear();
    out.json("summary.json", &lean)?;
    if !summary.traces.is_empty() {
        let mut lines = String::new();
        for t in &summary.traces {
            if let Err(e) = t.validate(n) {
                bail!("trace {} is inconsistent: {e}", t.replica);
            }
            lines.push_str(&serde_json::to_string(t)?);
            lines.push('\n');
        }
        out.raw("traces.jsonl", &lines)?;
    }
    Ok(())
}

pub fn alt(s: &Settings, out: &mut Session) -> Result<()> {
    let seed = s.seed.unwrap_or(0);
    let samples = s.replicas.unwrap_or(1_000_000);
    let mut exact = true;
    for n in 1..=12 {
        let (a, b) = (mallows_exact_pmf(n)?, fixed_point_pmf(n)?);
        exact &= (0..=n as u64 + 1).all(|x| a.pmf(x) == b.pmf(x));
    }
    out.check("bernoulli_products_exact_law N<=12", exact);

    let mut mallows = Table::new(&["N", "truncation", "replicas", "estimate", "sigma", "scaled", "tail_bound"]);
    let mut scaled = Vec::new();
    for &n in &s.ns {
        let k = 1000 * n as u64;
        let d = mallows_discrepancy(n as u64, samples, k, seed)?;
        scaled.push(n as f64 * d.estimate);
        mallows.push(vec![
            n.to_string(),
            k.to_string(),
            d.replicas.to_string(),
            fl(d.estimate),
            fl(d.sigma),
            fl(n as f64 * d.estimate),
            fl(d.tail_bound),
        ]);
    }
    if scaled.len() > 1 {
        let (lo, hi) = scaled.iter().fold((f64::INFINITY, 0.0f64), |(l, h), &v| (l.min(v), h.max(v)));
        out.check("bernoulli_discrepancy_scaling", lo > 0.0 && hi <= 3.0 * lo);
    }
    out.table("bernoulli_products", &mallows)?;

    let ns: Vec<u64> = (1..=8).collect();
    let batch = ascent_peak_batch(&AscentPeakConfig { samples, seed, ns: ns.clone() });
    out.check("ascent_peak_no_ties", batch.ties == 0);
    out.check("m_law_near_poisson", batch.m_tv_to_poisson() <= 0.005);
    let guard = Guard::from_env_or(PEAK_GUARD);
    let mut pmf = Table::new(&["variable", "k", "count"]);
    for (k, c) in &batch.m_counts {
        pmf.push(vec!["M".into(), k.to_string(), c.to_string()]);
    }
    let mut per_n = Table::new(&["N", "half_tv_to_pi", "disagree", "disagree_sigma", "peak_tail_exact", "peak_tail_bound"]);
    for &n in &ns {
        for (k, c) in &batch.mn_counts[&n] {
            pmf.push(vec![format!("M_{n}"), k.to_string(), c.to_string()]);
        }
        let pi = fixed_point_pmf(n as usize)?;
        let tv = batch.mn_tv_to(n, &pi);
        out.check(format!("m_n_law_near_pi N={n}"), tv <= 0.005);
        let law = guarded(out, &format!("m_n_exact_law N={n}"), Guard::new(6), n as usize, || {
            Ok(ascent_peak_exact_law(n as usize, Guard::new(6))?)
        })?;
        if let Some(law) = law {
            out.check(format!("m_n_exact_law N={n}"), (0..=n + 1).all(|x| law.pmf(x) == pi.pmf(x)));
        }
        let bound = rat(BigInt::from(1u32) << n, factorial(n as usize + 1));
        let (d, sigma) = batch.disagreement(n);
        let tail = guarded(out, &format!("peak_tail N={n}"), guard, n as usize, || Ok(peak_tail_exact(n as usize, guard)?))?;
        let tail_str = tail.as_ref().map(q).unwrap_or_default();
        if let Some(t) = tail {
            out.check(format!("peak_tail_bound N={n}"), t <= bound);
            out.check(format!("m_vs_m_n N={n}"), d <= t.approx() + 3.0 * sigma);
        }
        per_n.push(vec![n.to_string(), fl(tv), fl(d), fl(sigma), tail_str, q(&bound)]);
    }
    for n in 9..=10usize {
        let name = format!("peak_tail_bound N={n}");
        if let Some(t) = guarded(out, &name, guard, n, || Ok(peak_tail_exact(n, guard)?))? {
            out.check(name, t <= rat(BigInt::from(1u32) << n, factorial(n + 1)));
        }
    }
    out.table("ascent_peak_pmf", &pmf)?;
    out.table("ascent_peak", &per_n)
}

pub fn moments(s: &Settings, out: &mut Session) -> Result<()> {
    let guard = Guard::from_env_or(MOMENT_GUARD);
    let mut raw = Table::new(&["N", "k", "moment", "bell", "equal"]);
    let mut gram_t = Table::new(&["N", "k", "l", "G"]);
    let mut coeff = Table::new(&["N", "k", "a", "b", "c"]);
    let mut functional = Table::new(&["N", "lo", "hi"]);
    for &n in &s.ns {
        if n < 4 {
            bail!("moments needs N >= 4, got {n}");
        }
        out.check(format!("falling_moments N={n}"), (0..=n).map(|k| falling_moment(n, k)).all(|m| m.is_ok_and(|v| v == rat(1, 1))));
        let mut ok = true;
        for k in 0..=n + 1 {
            let r = raw_moment_equality(n, k)?;
            ok &= if k <= n { r.equal() } else { !r.equal() };
            raw.push(vec![n.to_string(), k.to_string(), q(&r.moment), r.bell.to_string(), r.equal().to_string()]);
        }
        out.check(format!("raw_moments_bell N={n}"), ok);
        let name = format!("eta2_fk_oracle N={n}");
        if let Some(agree) = guarded(out, &name, guard, n, || {
            let mut all = true;
            for k in 0..=n {
                all &= eta2_fk(n, k)? == eta2_fk_bruteforce(n, k, guard)?;
            }
            Ok(all)
        })? {
            out.check(name, agree);
        }
        let g = gram(n)?;
        let name = format!("gram_oracle N={n}");
        if let Some(b) = guarded(out, &name, guard, n, || Ok(gram_bruteforce(n, guard)?))? {
            out.check(name, b == g);
        }
        out.check(format!("gram_symmetric N={n}"), g.is_symmetric());
        for (i, &k) in g.index.iter().enumerate() {
            for (j, &l) in g.index.iter().enumerate() {
                gram_t.push(vec![n.to_string(), k.to_string(), l.to_string(), g.entries[i][j].to_string()]);
            }
        }
        let sys = coefficient_systems(n, s.digits)?;
        out.check(format!("coefficients_reconstruct_2p N={n}"), sys.passed());
        out.check(format!("deviation_identity N={n}"), deviation_identity_holds(n)?);
        for (i, &k) in sys.gram.index.iter().enumerate() {
            coeff.push(vec![n.to_string(), k.to_string(), q(&sys.a[i]), q(&sys.b[i]), q(&sys.c[i])]);
        }
        let [lo, hi] = lo_hi(&sys.functional);
        functional.push(vec![n.to_string(), lo, hi]);
    }
    out.table("raw_moments", &raw)?;
    out.table("gram", &gram_t)?;
    out.table("coefficients", &coeff)?;
    out.table("functional", &functional)
}
