//! Monotone coupling of two birth-and-death chains on `[0, N-4]` driven by
//! shared uniforms, the disagreement counters `Z`, `Z~`, `Z^`, hitting times
//! of zero, drift certificates and the assembled distance bound.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::combin::{factorial, int, rat};
use crate::error::{Error, Result};
use crate::exactdist::{poisson_truncated, tv_distance, Dist, TvConvention};
use crate::interval::{exp_small, Interval};
use crate::kernels::{
    birth_death_stationary, build_r, build_r_tilde, build_restricted, p_recursion, StochasticKernel,
};
use crate::rng::{next_dyadic, replica_rng};
use crate::scalar::Scalar;

/// Cumulative thresholds of a birth-and-death kernel on `0..=m`:
/// step down below `down[x]`, stay below `stay[x]`, else step up.
#[derive(Clone, Debug, PartialEq)]
pub struct Thresholds<T> {
    down: Vec<T>,
    stay: Vec<T>,
}

impl<T: Scalar> Thresholds<T> {
    /// Sums are formed exactly and rounded once.
    pub fn from_kernel(k: &StochasticKernel<BigRational>) -> Result<Self> {
        let contiguous = k.states().iter().enumerate().all(|(i, &s)| s == i as i64);
        if !contiguous || k.positional_bandwidth() > 1 {
            return Err(Error::InvalidKernel {
                label: k.label().into(),
                reason: "expected a birth-and-death kernel on 0..=m".into(),
            });
        }
        let mut down = Vec::with_capacity(k.len());
        let mut stay = Vec::with_capacity(k.len());
        for x in 0..k.len() {
            let d = if x > 0 { k.at(x, x - 1) } else { BigRational::zero() };
            let s = &d + k.at(x, x);
            down.push(T::from_rational(&d));
            stay.push(T::from_rational(&s));
        }
        Ok(Self { down, stay })
    }

    pub fn len(&self) -> usize {
        self.down.len()
    }

    pub fn is_empty(&self) -> bool {
        self.down.is_empty()
    }

    #[inline]
    pub fn step(&self, x: usize, u: &T) -> usize {
        if *u < self.down[x] {
            x - 1
        } else if *u < self.stay[x] {
            x
        } else {
            x + 1
        }
    }
}

/// One coupled transition under the shared uniform `u`.
#[inline]
pub fn monotone_step<T: Scalar>(x: usize, y: usize, u: &T, kx: &Thresholds<T>, ky: &Thresholds<T>) -> (usize, usize) {
    (kx.step(x, u), ky.step(y, u))
}

/// Which pair of kernels drives `(X, Y)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Selector {
    #[serde(rename = "check_r")]
    CheckR,
    #[serde(rename = "r_r")]
    RR,
    #[serde(rename = "check_rtilde")]
    CheckRTilde,
}

impl Selector {
    pub fn as_str(&self) -> &'static str {
        match self {
            Selector::CheckR => "check_r",
            Selector::RR => "r_r",
            Selector::CheckRTilde => "check_rtilde",
        }
    }
}

impl std::str::FromStr for Selector {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "check_r" => Ok(Selector::CheckR),
            "r_r" => Ok(Selector::RR),
            "check_rtilde" => Ok(Selector::CheckRTilde),
            _ => Err(Error::InvalidArgument(format!("unknown selector {s}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    Double,
    Exact,
}

/// How the two initial states are drawn from their stationary laws.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StartMode {
    /// Both by inverse CDF of one uniform.
    #[default]
    Shared,
    /// Two uniforms.
    Independent,
}

fn default_replicas() -> u64 {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(rename = "N")]
    pub size: usize,
    /// Horizon.
    #[serde(rename = "n")]
    pub horizon: u64,
    #[serde(default = "default_replicas")]
    pub replicas: u64,
    #[serde(default)]
    pub seed: u64,
    pub selector: Selector,
    #[serde(default)]
    pub precision: Precision,
    #[serde(default)]
    pub start: StartMode,
    /// Number of leading replicas whose full trace is kept.
    #[serde(default)]
    pub emit_traces: usize,
    /// Times at which estimates are reported; empty means `[n]`.
    #[serde(default)]
    pub checkpoints: Vec<u64>,
    /// Worker threads; 0 uses the global pool.
    #[serde(default)]
    pub jobs: usize,
}

impl RunConfig {
    pub fn new(size: usize, horizon: u64, replicas: u64, seed: u64, selector: Selector) -> Self {
        Self {
            size,
            horizon,
            replicas,
            seed,
            selector,
            precision: Precision::Double,
            start: StartMode::Shared,
            emit_traces: 0,
            checkpoints: Vec::new(),
            jobs: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.size < 5 {
            return Err(Error::InvalidArgument("coupling needs N >= 5".into()));
        }
        if self.replicas == 0 {
            return Err(Error::InvalidArgument("replicas must be >= 1".into()));
        }
        if let Some(c) = self.checkpoints.iter().find(|&&c| c > self.horizon) {
            return Err(Error::InvalidArgument(format!("checkpoint {c} beyond horizon {}", self.horizon)));
        }
        Ok(())
    }

    /// Sorted, deduplicated checkpoints.
    pub fn effective_checkpoints(&self) -> Vec<u64> {
        let mut c = if self.checkpoints.is_empty() { vec![self.horizon] } else { self.checkpoints.clone() };
        c.sort_unstable();
        c.dedup();
        c
    }
}

/// Counter increments at one transition.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepFlags {
    pub z: bool,
    pub z_tilde: bool,
    pub z_hat: bool,
}

impl StepFlags {
    #[inline]
    pub fn of(x: usize, y: usize, x1: usize, y1: usize) -> Self {
        Self { z: x == y && x1 != y1, z_tilde: x <= y && x1 > y1, z_hat: x >= y && x1 < y1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub x: usize,
    pub y: usize,
    pub u: f64,
    pub flags: StepFlags,
}

/// Full record of one coupled trajectory.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CouplingTrace {
    pub replica: u64,
    /// State before each transition, the uniform used and its increments.
    pub steps: Vec<TraceStep>,
    pub final_x: usize,
    pub final_y: usize,
    pub tau: Option<u64>,
    pub tau0_x: Option<u64>,
    pub tau0_y: Option<u64>,
    pub z_incr: Vec<u64>,
    pub ztilde_incr: Vec<u64>,
    pub zhat_incr: Vec<u64>,
}

impl CouplingTrace {
    fn path(&self) -> Vec<(usize, usize)> {
        let mut p: Vec<(usize, usize)> = self.steps.iter().map(|s| (s.x, s.y)).collect();
        p.push((self.final_x, self.final_y));
        p
    }

    /// Checks ranges, counter increments, hitting times, and that the weak
    /// order between `X` and `Y` survives every step without a `Z~`/`Z^`
    /// increment.
    pub fn validate(&self, max_state: usize) -> std::result::Result<(), String> {
        let path = self.path();
        if let Some(k) = path.iter().position(|&(x, y)| x > max_state || y > max_state) {
            return Err(format!("state out of range at step {k}"));
        }
        if let Some(k) = self.steps.iter().position(|s| !(0.0..1.0).contains(&s.u)) {
            return Err(format!("uniform out of range at step {k}"));
        }
        let mut z = Vec::new();
        let mut zt = Vec::new();
        let mut zh = Vec::new();
        for (k, s) in self.steps.iter().enumerate() {
            let (x1, y1) = path[k + 1];
            let f = StepFlags::of(s.x, s.y, x1, y1);
            if f != s.flags {
                return Err(format!("flags disagree with the path at step {k}"));
            }
            if !f.z_tilde && !f.z_hat {
                let kept = (s.x <= s.y && x1 <= y1) || (s.x >= s.y && x1 >= y1);
                if !kept {
                    return Err(format!("order broken without a counter increment at step {k}"));
                }
            }
            let k = k as u64;
            if f.z {
                z.push(k);
            }
            if f.z_tilde {
                zt.push(k);
            }
            if f.z_hat {
                zh.push(k);
            }
        }
        if (z, zt, zh) != (self.z_incr.clone(), self.ztilde_incr.clone(), self.zhat_incr.clone()) {
            return Err("increment lists disagree with flags".into());
        }
        let first = |pred: &dyn Fn(usize, usize) -> bool| path.iter().position(|&(x, y)| pred(x, y)).map(|k| k as u64);
        if first(&|x, y| x == y) != self.tau {
            return Err("tau disagrees with the path".into());
        }
        if first(&|x, _| x == 0) != self.tau0_x || first(&|_, y| y == 0) != self.tau0_y {
            return Err("hitting time of zero disagrees with the path".into());
        }
        Ok(())
    }
}

trait Recorder {
    fn record(&mut self, x: usize, y: usize, k: u64, flags: StepFlags);
}

impl Recorder for () {
    #[inline]
    fn record(&mut self, _: usize, _: usize, _: u64, _: StepFlags) {}
}

impl Recorder for CouplingTrace {
    fn record(&mut self, x: usize, y: usize, k: u64, flags: StepFlags) {
        self.steps.push(TraceStep { x, y, u: k as f64 / (1u64 << 53) as f64, flags });
    }
}

/// First occurrence times for one replica, and disagreement at checkpoints.
#[derive(Clone, Debug, PartialEq, Eq)]
struct ReplicaOutcome {
    tau: Option<u64>,
    z: Option<u64>,
    z_tilde: Option<u64>,
    z_hat: Option<u64>,
    tau0_x: Option<u64>,
    tau0_y: Option<u64>,
    disagree: Vec<bool>,
}

/// Kernels and initial laws for a selector.
#[derive(Clone, Debug)]
pub struct CouplingPair {
    pub kx: StochasticKernel<BigRational>,
    pub ky: StochasticKernel<BigRational>,
    pub law_x: Dist<BigRational>,
    pub law_y: Dist<BigRational>,
}

impl CouplingPair {
    pub fn new(n: usize, selector: Selector) -> Result<Self> {
        let r = build_r(n)?;
        let zeta = poisson_truncated(n - 4)?;
        let check = || -> Result<(StochasticKernel<BigRational>, Dist<BigRational>)> {
            let ks = build_restricted(&p_recursion(n)?)?;
            let law = birth_death_stationary(&ks.check, format!("picheck_{n}"))?;
            Ok((ks.check, law))
        };
        Ok(match selector {
            Selector::CheckR => {
                let (kx, law_x) = check()?;
                Self { kx, ky: r, law_x, law_y: zeta }
            }
            Selector::RR => Self { kx: r.clone(), ky: r, law_x: zeta.clone(), law_y: zeta },
            Selector::CheckRTilde => {
                let (kx, law_x) = check()?;
                let ky = build_r_tilde(n)?;
                let law_y = birth_death_stationary(&ky, format!("rtilde_law_{n}"))?;
                Self { kx, ky, law_x, law_y }
            }
        })
    }
}

struct Prepared<T> {
    kx: Thresholds<T>,
    ky: Thresholds<T>,
    cdf_x: Vec<T>,
    cdf_y: Vec<T>,
}

fn cdf<T: Scalar>(d: &Dist<BigRational>, len: usize) -> Vec<T> {
    let mut acc = BigRational::zero();
    (0..len)
        .map(|x| {
            acc += d.pmf(x as u64);
            T::from_rational(&acc)
        })
        .collect()
}

fn inverse_cdf<T: Scalar>(cdf: &[T], u: &T) -> usize {
    cdf.iter().position(|c| u < c).unwrap_or(cdf.len() - 1)
}

impl<T: Scalar> Prepared<T> {
    fn new(pair: &CouplingPair) -> Result<Self> {
        let kx = Thresholds::from_kernel(&pair.kx)?;
        let ky = Thresholds::from_kernel(&pair.ky)?;
        let (lx, ly) = (kx.len(), ky.len());
        Ok(Self { cdf_x: cdf(&pair.law_x, lx), cdf_y: cdf(&pair.law_y, ly), kx, ky })
    }
}

fn simulate<T: Scalar, R: Recorder>(
    prep: &Prepared<T>,
    cfg: &RunConfig,
    checkpoints: &[u64],
    replica: u64,
    rec: &mut R,
) -> (ReplicaOutcome, usize, usize) {
    let mut rng = replica_rng(cfg.seed, replica);
    let u0 = T::from_dyadic53(next_dyadic(&mut rng));
    let mut x = inverse_cdf(&prep.cdf_x, &u0);
    let mut y = match cfg.start {
        StartMode::Shared => inverse_cdf(&prep.cdf_y, &u0),
        StartMode::Independent => inverse_cdf(&prep.cdf_y, &T::from_dyadic53(next_dyadic(&mut rng))),
    };
    let mut out = ReplicaOutcome {
        tau: (x == y).then_some(0),
        z: None,
        z_tilde: None,
        z_hat: None,
        tau0_x: (x == 0).then_some(0),
        tau0_y: (y == 0).then_some(0),
        disagree: Vec::with_capacity(checkpoints.len()),
    };
    let mut next_cp = 0;
    while next_cp < checkpoints.len() && checkpoints[next_cp] == 0 {
        out.disagree.push(x != y);
        next_cp += 1;
    }
    for k in 0..cfg.horizon {
        let draw = next_dyadic(&mut rng);
        let u = T::from_dyadic53(draw);
        let (x1, y1) = monotone_step(x, y, &u, &prep.kx, &prep.ky);
        let flags = StepFlags::of(x, y, x1, y1);
        rec.record(x, y, draw, flags);
        if flags.z && out.z.is_none() {
            out.z = Some(k);
        }
        if flags.z_tilde && out.z_tilde.is_none() {
            out.z_tilde = Some(k);
        }
        if flags.z_hat && out.z_hat.is_none() {
            out.z_hat = Some(k);
        }
        x = x1;
        y = y1;
        let t = k + 1;
        if out.tau.is_none() && x == y {
            out.tau = Some(t);
        }
        if out.tau0_x.is_none() && x == 0 {
            out.tau0_x = Some(t);
        }
        if out.tau0_y.is_none() && y == 0 {
            out.tau0_y = Some(t);
        }
        while next_cp < checkpoints.len() && checkpoints[next_cp] == t {
            out.disagree.push(x != y);
            next_cp += 1;
        }
    }
    (out, x, y)
}

fn trace_for<T: Scalar>(prep: &Prepared<T>, cfg: &RunConfig, checkpoints: &[u64], replica: u64) -> CouplingTrace {
    let mut trace = CouplingTrace { replica, ..Default::default() };
    let (out, fx, fy) = simulate(prep, cfg, checkpoints, replica, &mut trace);
    trace.final_x = fx;
    trace.final_y = fy;
    trace.tau = out.tau;
    trace.tau0_x = out.tau0_x;
    trace.tau0_y = out.tau0_y;
    for (k, s) in trace.steps.iter().enumerate() {
        let k = k as u64;
        if s.flags.z {
            trace.z_incr.push(k);
        }
        if s.flags.z_tilde {
            trace.ztilde_incr.push(k);
        }
        if s.flags.z_hat {
            trace.zhat_incr.push(k);
        }
    }
    trace
}

/// Empirical frequency with its binomial standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub count: u64,
    pub replicas: u64,
    pub p: f64,
    pub sigma: f64,
}

impl Estimate {
    pub fn new(count: u64, replicas: u64) -> Self {
        let p = count as f64 / replicas as f64;
        Self { count, replicas, p, sigma: (p * (1.0 - p) / replicas as f64).sqrt() }
    }

    /// `p + 3 sigma`.
    pub fn upper3(&self) -> f64 {
        self.p + 3.0 * self.sigma
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointEstimates {
    pub n: u64,
    pub disagree: Estimate,
    pub tau_gt: Estimate,
    pub z_pos: Estimate,
    pub ztilde_pos: Estimate,
    pub zhat_pos: Estimate,
    pub tau0x_gt: Estimate,
    pub tau0y_gt: Estimate,
}

impl CheckpointEstimates {
    /// Right-hand side of the tail decomposition of `P[tau > n]`.
    pub fn tails_sum(&self) -> f64 {
        self.tau0x_gt.p + self.tau0y_gt.p + self.ztilde_pos.p + self.zhat_pos.p
    }

    /// `3 sigma` of each of the four tail terms, summed.
    pub fn tails_radius(&self) -> f64 {
        3.0 * (self.tau0x_gt.sigma + self.tau0y_gt.sigma + self.ztilde_pos.sigma + self.zhat_pos.sigma)
    }

    /// `P[tau > n] <= sum of the four tail terms`, allowing `3 sigma` per
    /// term and for the left side.
    pub fn tails_hold(&self) -> bool {
        self.tau_gt.p <= self.tails_sum() + self.tails_radius() + 3.0 * self.tau_gt.sigma
    }

    /// Empirical version of the assembled bound on `P[X(n) != Y(n)]`.
    pub fn assembled(&self) -> f64 {
        self.z_pos.p + self.tails_sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub config: RunConfig,
    pub checkpoints: Vec<CheckpointEstimates>,
    /// Half-convention distance between the two initial laws, exact.
    pub exact_tv_half: f64,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub traces: Vec<CouplingTrace>,
}

fn count_at(outcomes: &[ReplicaOutcome], f: impl Fn(&ReplicaOutcome) -> bool) -> u64 {
    outcomes.iter().filter(|o| f(o)).count() as u64
}

fn run_typed<T: Scalar>(cfg: &RunConfig, pair: &CouplingPair) -> Result<(Vec<ReplicaOutcome>, Vec<CouplingTrace>)> {
    let prep = Prepared::<T>::new(pair)?;
    let cps = cfg.effective_checkpoints();
    let work = || {
        (0..cfg.replicas)
            .into_par_iter()
            .map(|r| simulate(&prep, cfg, &cps, r, &mut ()).0)
            .collect::<Vec<_>>()
    };
    let outcomes = if cfg.jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.jobs)
            .build()
            .map_err(|e| Error::InvalidArgument(e.to_string()))?
            .install(work)
    } else {
        work()
    };
    let traced = (cfg.emit_traces as u64).min(cfg.replicas);
    let traces = (0..traced).map(|r| trace_for(&prep, cfg, &cps, r)).collect();
    Ok((outcomes, traces))
}

/// Runs every replica and aggregates the coupling events at each checkpoint.
pub fn run_coupling(cfg: &RunConfig) -> Result<RunSummary> {
    cfg.validate()?;
    let pair = CouplingPair::new(cfg.size, cfg.selector)?;
    let (outcomes, traces) = match cfg.precision {
        Precision::Double => run_typed::<f64>(cfg, &pair)?,
        Precision::Exact => run_typed::<BigRational>(cfg, &pair)?,
    };
    let r = cfg.replicas;
    let before = |t: Option<u64>, n: u64| t.is_some_and(|k| k < n);
    let after = |t: Option<u64>, n: u64| t.is_none_or(|k| k > n);
    let checkpoints = cfg
        .effective_checkpoints()
        .into_iter()
        .enumerate()
        .map(|(i, n)| CheckpointEstimates {
            n,
            disagree: Estimate::new(count_at(&outcomes, |o| o.disagree[i]), r),
            tau_gt: Estimate::new(count_at(&outcomes, |o| after(o.tau, n)), r),
            z_pos: Estimate::new(count_at(&outcomes, |o| before(o.z, n)), r),
            ztilde_pos: Estimate::new(count_at(&outcomes, |o| before(o.z_tilde, n)), r),
            zhat_pos: Estimate::new(count_at(&outcomes, |o| before(o.z_hat, n)), r),
            tau0x_gt: Estimate::new(count_at(&outcomes, |o| after(o.tau0_x, n)), r),
            tau0y_gt: Estimate::new(count_at(&outcomes, |o| after(o.tau0_y, n)), r),
        })
        .collect();
    let exact_tv_half = tv_distance(&pair.law_x, &pair.law_y, TvConvention::Half).approx();
    Ok(RunSummary { config: cfg.clone(), checkpoints, exact_tv_half, traces })
}

/// `2^N n / N!`.
pub fn z_bound(n: usize, horizon: u64) -> f64 {
    (BigRational::new(BigInt::from(2).pow(n as u32) * horizon, factorial(n))).approx()
}

/// `2^(N+1) n / N!`.
pub fn ztilde_bound(n: usize, horizon: u64) -> f64 {
    2.0 * z_bound(n, horizon)
}

/// Margin `K(x, x-1) + K(x, x) - K(x+1, x)` at one site.
#[derive(Clone, Debug, PartialEq)]
pub struct MonotonicityReport<T> {
    pub margins: Vec<(i64, T)>,
    pub passed: bool,
}

/// Stochastic monotonicity of a positional birth-and-death kernel.
pub fn monotonicity_certificate<T: Scalar>(k: &StochasticKernel<T>) -> MonotonicityReport<T> {
    let margins: Vec<(i64, T)> = (0..k.len().saturating_sub(1))
        .map(|x| {
            let down = if x > 0 { k.at(x, x - 1) } else { T::zero() };
            (k.states()[x], down + k.at(x, x) - k.at(x + 1, x))
        })
        .collect();
    let passed = margins.iter().all(|(_, m)| *m >= T::zero());
    MonotonicityReport { margins, passed }
}

/// Which chain the drift certificate is about.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DriftVariant {
    R,
    RTilde,
}

/// `F(y) = E[exp(theta (Y' - Y)) | Y = y]` on `[1, N-4]` with
/// `theta = 1/(lambda N)`, computed from the exact kernel on enclosures of
/// `e^(+-theta)`.
#[derive(Clone, Debug)]
pub struct DriftCertificate {
    pub n: usize,
    pub variant: DriftVariant,
    pub lambda: u32,
    pub table: Vec<(usize, Interval)>,
    pub argmax: usize,
    /// Upper end of `max_y F(y)`.
    pub max_f_hi: BigRational,
    /// `N^3 (1 - max F)`, rounded down; positive iff certified.
    pub c_est: f64,
    pub certified: bool,
    /// The maximum sits at `y = 1` or `y = N-4`.
    pub max_at_endpoint: bool,
    /// Minimizer `(N + e^theta)/2` of the unrestricted quadratic.
    pub vertex: f64,
    /// `(e^theta - 1 + N)/(2(1 - e^-theta))`.
    pub vertex_alt: f64,
}

impl DriftCertificate {
    /// `e^(1 - c n / N^3)`.
    pub fn tail_bound(&self, horizon: u64) -> f64 {
        (1.0 - self.c_est * horizon as f64 / (self.n as f64).powi(3)).exp()
    }
}

const DRIFT_DIGITS: u32 = 40;

pub fn drift_certificate(n: usize, variant: DriftVariant, lambda: u32) -> Result<DriftCertificate> {
    if lambda == 0 {
        return Err(Error::InvalidArgument("lambda must be positive".into()));
    }
    let k = match variant {
        DriftVariant::R => build_r(n)?,
        DriftVariant::RTilde => build_r_tilde(n)?,
    };
    let theta = rat(1, (lambda as usize * n) as i64);
    let e_up = exp_small(&theta, DRIFT_DIGITS);
    let e_down = exp_small(&-theta.clone(), DRIFT_DIGITS);
    let one = Interval::point(BigRational::one());
    let top = n - 4;
    let table: Vec<(usize, Interval)> = (1..=top)
        .map(|y| {
            let down = Interval::point(k.at(y, y - 1));
            let up = if y < top { Interval::point(k.at(y, y + 1)) } else { Interval::zero() };
            let f = one.clone() + down * (e_down.clone() - one.clone()) + up * (e_up.clone() - one.clone());
            (y, f)
        })
        .collect();
    let (argmax, max_iv) = table
        .iter()
        .max_by(|a, b| a.1.hi().cmp(b.1.hi()))
        .map(|(y, f)| (*y, f.clone()))
        .expect("N >= 5");
    let max_f_hi = max_iv.hi().clone();
    let certified = max_f_hi < BigRational::one();
    let c_rat = (BigRational::one() - &max_f_hi) * int((n * n * n) as i64);
    let c_est = c_rat.to_f64().unwrap_or(f64::NAN) * (1.0 - 1e-12);
    let theta_f = 1.0 / (lambda as f64 * n as f64);
    Ok(DriftCertificate {
        n,
        variant,
        lambda,
        argmax,
        max_at_endpoint: argmax == 1 || argmax == top,
        table,
        max_f_hi,
        c_est,
        certified,
        vertex: (n as f64 + theta_f.exp()) / 2.0,
        vertex_alt: (theta_f.exp() - 1.0 + n as f64) / (2.0 * (1.0 - (-theta_f).exp())),
    })
}

/// The best certified `lambda` among `{1, 2, 4, 8}`.
pub fn best_drift_certificate(n: usize, variant: DriftVariant) -> Result<DriftCertificate> {
    let mut best: Option<DriftCertificate> = None;
    for lambda in [1, 2, 4, 8] {
        let c = drift_certificate(n, variant, lambda)?;
        if c.certified && best.as_ref().is_none_or(|b| c.c_est > b.c_est) {
            best = Some(c);
        }
    }
    best.ok_or_else(|| Error::PrecisionInsufficient(format!("no drift certificate for N = {n}")))
}

/// Horizons `N^4 ln N / c` and `N ln N / c`.
pub fn horizons(n: usize, c_hat: f64) -> (u64, u64) {
    let nf = n as f64;
    ((nf.powi(4) * nf.ln() / c_hat).ceil() as u64, (nf * nf.ln() / c_hat).ceil() as u64)
}

/// `5 * 2^N n / N! + 2 e^(1 - c n / N^3)`.
pub fn tv_bound_analytic(n: usize, horizon: u64, c_hat: f64) -> f64 {
    5.0 * z_bound(n, horizon) + 2.0 * (1.0 - c_hat * horizon as f64 / (n as f64).powi(3)).exp()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TvBound {
    pub n: usize,
    pub horizon: u64,
    pub c: f64,
    pub c_tilde: f64,
    pub c_hat: f64,
    pub analytic: f64,
    /// Sum of the five empirical terms, when estimates are supplied.
    pub empirical: Option<f64>,
    /// Half-convention distance between the conditioned fixed-point law and
    /// the conditioned Poisson law.
    pub exact_tv_half: f64,
}

/// Combines the drift certificates of `R` and `R~` (best `lambda` each) with
/// optional empirical estimates at the same horizon.
pub fn assemble_tv_bound(n: usize, horizon: u64, estimates: Option<&CheckpointEstimates>) -> Result<TvBound> {
    let c = best_drift_certificate(n, DriftVariant::R)?.c_est;
    let c_tilde = best_drift_certificate(n, DriftVariant::RTilde)?.c_est;
    let c_hat = c.min(c_tilde);
    let pair = CouplingPair::new(n, Selector::CheckR)?;
    Ok(TvBound {
        n,
        horizon,
        c,
        c_tilde,
        c_hat,
        analytic: tv_bound_analytic(n, horizon, c_hat),
        empirical: estimates.map(CheckpointEstimates::assembled),
        exact_tv_half: tv_distance(&pair.law_x, &pair.law_y, TvConvention::Half).approx(),
    })
}
