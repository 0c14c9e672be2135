//! Monte Carlo estimators that compare sampled processes with their analytic
//! references, and the replication engine behind them.
//!
//! Every replication `i` of ladder rung `j` draws from its own stream
//! `(seed, estimator tag, j, i)`, and results are gathered in replication
//! order, so a report depends only on the configuration and not on the number
//! of worker threads.

use std::fmt;
use std::io;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{
    alpha_k, expected_low_degree_count, intensity_tail, m0_limit_functional, m0_test_value,
    poisson_tail_rate, rate_i_k, regime_diagnostic, sandwich_failure_bound, scaling_b_n,
    MarkFunction, Plateau, RegimeReport,
};
use crate::blocking::{build_eta, build_eta_truncated, per_cube_counts, BlockedConfig};
use crate::error::{LabError, Result};
use crate::process::{build_l, count_low_degree, fmt_sig17, tv_distance_atomic, ProcessParams};
use crate::rng::RngStream;
use crate::sampling::{
    draw_sandwiched_with, sample_binomial_process, sample_coupled_with, sample_poisson_process,
    sample_poisson_with, sandwich_holds, PointSet,
};
use crate::stats::{
    empirical_pmf, proportion, spearman_decreasing, tv_noise_floor, tv_to_poisson, Summary, Z99,
};
use crate::torus::Dimension;

/// Significance level of every trend test.
pub const TREND_LEVEL: f64 = 0.05;
/// Smallest ladder on which an exact Spearman test can reach `p < TREND_LEVEL`.
pub const MIN_TREND_RUNGS: usize = 4;

/// Expected hit counts below this trigger an insufficient-replication warning.
pub const MIN_EXPECTED_HITS: f64 = 20.0;

/// How the centering `a_n` depends on `n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "rule", content = "param", rename_all = "snake_case")]
pub enum ASchedule {
    /// `c log n` with `0 < c < 1`: many large balls.
    Fraction(f64),
    /// `log n + (k-1) log log n + c`: the Poisson boundary.
    Boundary(f64),
    /// `c log n` with `c > 1`: large balls are rare.
    Power(f64),
    /// The same `a_n` at every rung.
    Constant(f64),
    /// One value per ladder rung.
    Explicit(Vec<f64>),
}

impl ASchedule {
    /// Parses a named rule with its parameters.
    pub fn from_rule(rule: &str, params: &[f64]) -> Result<Self> {
        let one = |what: &str| -> Result<f64> {
            match params {
                [c] => Ok(*c),
                _ => Err(LabError::Config(format!("a-rule `{what}` takes exactly one parameter"))),
            }
        };
        let s = match rule {
            "fraction" => ASchedule::Fraction(one(rule)?),
            "boundary" => ASchedule::Boundary(one(rule)?),
            "power" => ASchedule::Power(one(rule)?),
            "constant" => ASchedule::Constant(one(rule)?),
            "explicit" => ASchedule::Explicit(params.to_vec()),
            other => return Err(LabError::Config(format!("unknown a-rule `{other}`"))),
        };
        Ok(s)
    }

    /// `a_n` at rung `rung` of a ladder.
    pub fn value(&self, n: f64, k: usize, rung: usize) -> f64 {
        match self {
            ASchedule::Fraction(c) | ASchedule::Power(c) => c * n.ln(),
            ASchedule::Boundary(c) => n.ln() + (k as f64 - 1.0) * n.ln().ln() + c,
            ASchedule::Constant(c) => *c,
            ASchedule::Explicit(v) => v[rung],
        }
    }

    fn validate(&self, ladder_len: usize) -> Result<()> {
        let finite = |c: f64| {
            if c.is_finite() {
                Ok(())
            } else {
                Err(LabError::Config(format!("a-rule parameter must be finite, got {c}")))
            }
        };
        match self {
            ASchedule::Fraction(c) if !(*c > 0.0 && *c < 1.0) => {
                Err(LabError::Config(format!("fraction rule needs 0 < c < 1, got {c}")))
            }
            ASchedule::Power(c) if !(*c > 1.0) || !c.is_finite() => {
                Err(LabError::Config(format!("power rule needs c > 1, got {c}")))
            }
            ASchedule::Boundary(c) | ASchedule::Constant(c) => finite(*c),
            ASchedule::Explicit(v) if v.len() != ladder_len => Err(LabError::Config(format!(
                "explicit schedule has {} values for {ladder_len} ladder rungs",
                v.len()
            ))),
            ASchedule::Explicit(v) => v.iter().try_for_each(|&c| finite(c)),
            _ => Ok(()),
        }
    }
}

/// How the boundary-shell parameter `w_n` depends on `a_n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "rule", content = "param", rename_all = "snake_case")]
pub enum WRule {
    /// `sqrt(a_n)`.
    Sqrt,
    /// `a_n^p` with `0 < p < 1`.
    Power(f64),
    Constant(f64),
}

impl WRule {
    pub fn from_rule(rule: &str, params: &[f64]) -> Result<Self> {
        match (rule, params) {
            ("sqrt", []) => Ok(WRule::Sqrt),
            ("power", [p]) if *p > 0.0 && *p < 1.0 => Ok(WRule::Power(*p)),
            ("constant", [c]) if c.is_finite() => Ok(WRule::Constant(*c)),
            _ => Err(LabError::Config(format!("invalid w-rule `{rule}` with parameters {params:?}"))),
        }
    }

    pub fn value(&self, a_n: f64) -> f64 {
        match self {
            WRule::Sqrt => a_n.max(0.0).sqrt(),
            WRule::Power(p) => a_n.max(0.0).powf(*p),
            WRule::Constant(c) => *c,
        }
    }
}

/// Which process feeds the estimators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputKind {
    /// Poisson process of intensity `n`.
    Poisson,
    /// Exactly `n` uniform points.
    Binomial,
}

/// Height of a plateau test function on `[0,1]^d x [u_lo, u_hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlateauSpec {
    pub height: f64,
    pub u_lo: f64,
    pub u_hi: f64,
}

/// A fully validated experiment description.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub d: usize,
    pub k: usize,
    pub s0: f64,
    pub n_ladder: Vec<f64>,
    pub a_schedule: ASchedule,
    pub reps: u64,
    pub seed: u64,
    pub w_rule: WRule,
    /// Coupling parameter as the ratio `eps / a_n`.
    pub eps: f64,
    pub input: InputKind,
    /// Rate-curve abscissae as multiples of `alpha_k`.
    pub x_grid: Vec<f64>,
    /// Intensity-check mark levels as offsets above `s0`.
    pub u_offsets: Vec<f64>,
    /// Side of the intensity-check box `[0, side]^d`.
    pub box_side: f64,
    pub plateau: PlateauSpec,
    pub eps_pair: [f64; 2],
    /// Number of blocking cubes; `b_n` of each rung when absent.
    pub b_target: Option<f64>,
    /// Worker cap; not part of the result, so it is not echoed.
    #[serde(skip)]
    pub threads: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            d: 1,
            k: 1,
            s0: 0.0,
            n_ladder: vec![1000.0],
            a_schedule: ASchedule::Constant(5.0),
            reps: 1000,
            seed: 7,
            w_rule: WRule::Sqrt,
            eps: 0.25,
            input: InputKind::Poisson,
            x_grid: vec![0.5, 1.0, 1.5, 2.0],
            u_offsets: vec![0.0, 1.0],
            box_side: 0.5,
            plateau: PlateauSpec {
                height: 1.0,
                u_lo: 0.0,
                u_hi: 1.0,
            },
            eps_pair: [0.0, 0.0],
            b_target: None,
            threads: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let cfg = |m: String| Err(LabError::Config(m));
        if self.d == 0 {
            return cfg("dimension must be at least 1".into());
        }
        if self.k == 0 {
            return cfg("k must be at least 1".into());
        }
        if !self.s0.is_finite() {
            return cfg(format!("s0 must be finite, got {}", self.s0));
        }
        if self.reps == 0 {
            return cfg("reps must be at least 1".into());
        }
        if self.reps >= 1 << 32 {
            return cfg(format!("reps must be below 2^32, got {}", self.reps));
        }
        if self.n_ladder.is_empty() {
            return cfg("n-ladder must not be empty".into());
        }
        if self.n_ladder.len() > u16::MAX as usize {
            return cfg("n-ladder is too long".into());
        }
        if self.n_ladder.iter().any(|&n| !(n > 0.0) || !n.is_finite()) {
            return cfg(format!("n-ladder entries must be positive, got {:?}", self.n_ladder));
        }
        if self.n_ladder.windows(2).any(|w| w[1] <= w[0]) {
            return cfg(format!("n-ladder must be strictly increasing, got {:?}", self.n_ladder));
        }
        if self.input == InputKind::Binomial && self.n_ladder.iter().any(|&n| n.fract() != 0.0) {
            return cfg("binomial input needs integer n".into());
        }
        self.a_schedule.validate(self.n_ladder.len())?;
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return cfg(format!("eps (as a fraction of a_n) must lie in (0, 1), got {}", self.eps));
        }
        if self.x_grid.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
            return cfg(format!("x-grid entries must be non-negative, got {:?}", self.x_grid));
        }
        if self.u_offsets.iter().any(|&u| !(u >= 0.0) || !u.is_finite()) {
            return cfg(format!("u offsets must be non-negative, got {:?}", self.u_offsets));
        }
        if !(0.0..=1.0).contains(&self.box_side) {
            return cfg(format!("box side must lie in [0, 1], got {}", self.box_side));
        }
        let p = &self.plateau;
        if !(p.height >= 0.0) || !(p.u_hi >= p.u_lo) || !p.u_lo.is_finite() || !p.u_hi.is_finite() {
            return cfg(format!("invalid plateau {p:?}"));
        }
        if self.eps_pair.iter().any(|&e| !(e >= 0.0)) {
            return cfg(format!("eps pair must be non-negative, got {:?}", self.eps_pair));
        }
        if let Some(b) = self.b_target {
            if !(b > 0.0) || !b.is_finite() {
                return cfg(format!("b-target must be positive, got {b}"));
            }
        }
        if self.threads == Some(0) {
            return cfg("threads must be at least 1".into());
        }
        Ok(())
    }

    pub fn dim(&self) -> Dimension {
        Dimension::new(self.d).expect("validated")
    }

    /// `a_n` for every ladder rung.
    pub fn a_values(&self) -> Vec<f64> {
        self.n_ladder
            .iter()
            .enumerate()
            .map(|(j, &n)| self.a_schedule.value(n, self.k, j))
            .collect()
    }

    fn params(&self, rung: usize) -> Result<ProcessParams> {
        let n = self.n_ladder[rung];
        ProcessParams::new(n, self.a_schedule.value(n, self.k, rung), self.k, self.s0, self.dim())
    }
}

/// Estimators exposed by [`run`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Estimator {
    MeanT,
    CountPmfTv,
    RareEvent,
    RateCurve,
    Intensity,
    Blocking,
    M0Functional,
    Coupling,
}

impl Estimator {
    pub const ALL: [Estimator; 8] = [
        Estimator::MeanT,
        Estimator::CountPmfTv,
        Estimator::RareEvent,
        Estimator::RateCurve,
        Estimator::Intensity,
        Estimator::Blocking,
        Estimator::M0Functional,
        Estimator::Coupling,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Estimator::MeanT => "mean-t",
            Estimator::CountPmfTv => "pmf-tv",
            Estimator::RareEvent => "rare-event",
            Estimator::RateCurve => "rate-curve",
            Estimator::Intensity => "intensity",
            Estimator::Blocking => "blocking",
            Estimator::M0Functional => "m0",
            Estimator::Coupling => "coupling",
        }
    }

    /// Stream tag. The rare-event and M0 estimators share a tag: they read
    /// different statistics off the same simulated processes.
    fn tag(self) -> u16 {
        match self {
            Estimator::MeanT => 1,
            Estimator::CountPmfTv => 2,
            Estimator::RareEvent | Estimator::M0Functional => 3,
            Estimator::RateCurve => 4,
            Estimator::Intensity => 5,
            Estimator::Blocking => 6,
            Estimator::Coupling => 7,
        }
    }
}

impl FromStr for Estimator {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        Estimator::ALL
            .into_iter()
            .find(|e| e.id() == s)
            .ok_or_else(|| LabError::UnknownEstimator(s.to_string()))
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

/// Acceptance band around a reference value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Tolerance {
    /// `|estimate - reference| <= value * |reference|`.
    Relative(f64),
    /// `|estimate - reference| <= value`.
    Absolute(f64),
    /// The reference must lie inside the 99% interval.
    Ci99,
    /// The estimate must not exceed the reference at 99% confidence.
    UpperBound99,
}

/// One statistic at one ladder rung.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointRecord {
    pub n: f64,
    pub a_n: f64,
    pub b_n: f64,
    pub statistic: String,
    pub x: Option<f64>,
    pub estimate: f64,
    pub stderr: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub reps: u64,
    pub reference: Option<f64>,
    pub tolerance: Option<Tolerance>,
    /// Zero-hit cell whose estimate uses the `1/(2 reps)` floor.
    pub censored: bool,
    pub pass: Option<bool>,
}

/// Spearman trend of one statistic along the ladder.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrendRecord {
    pub statistic: String,
    pub x: Option<f64>,
    pub values: Vec<f64>,
    pub rho: f64,
    pub p_value: f64,
    pub decreasing: bool,
    /// Whether the trend counts towards the report's verdict.
    pub required: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateReport {
    pub estimator: String,
    pub config: ExperimentConfig,
    pub points: Vec<PointRecord>,
    pub trends: Vec<TrendRecord>,
    pub warnings: Vec<String>,
    pub pass: bool,
}

impl EstimateReport {
    fn new(est: Estimator, config: &ExperimentConfig) -> Self {
        EstimateReport {
            estimator: est.id().to_string(),
            config: config.clone(),
            points: Vec::new(),
            trends: Vec::new(),
            warnings: Vec::new(),
            pass: true,
        }
    }

    /// All records of `statistic`, in ladder order.
    pub fn series(&self, statistic: &str, x: Option<f64>) -> Vec<&PointRecord> {
        self.points
            .iter()
            .filter(|p| p.statistic == statistic && p.x == x)
            .collect()
    }

    /// Record of `statistic` at the last ladder rung.
    pub fn top(&self, statistic: &str, x: Option<f64>) -> Option<&PointRecord> {
        self.series(statistic, x).pop()
    }

    pub fn trend(&self, statistic: &str, x: Option<f64>) -> Option<&TrendRecord> {
        self.trends.iter().find(|t| t.statistic == statistic && t.x == x)
    }

    fn add_trend(&mut self, statistic: &str, x: Option<f64>, required: bool) {
        let values: Vec<f64> = self.series(statistic, x).iter().map(|p| p.estimate).collect();
        if values.len() < 2 {
            return;
        }
        let t = spearman_decreasing(&values);
        // With fewer rungs even a perfectly monotone series cannot reach
        // the trend level, so the trend is reported but not enforced.
        let required = if required && values.len() < MIN_TREND_RUNGS {
            self.warnings.push(format!(
                "trend of {statistic} not enforced: {} rungs < {MIN_TREND_RUNGS}",
                values.len()
            ));
            false
        } else {
            required
        };
        self.trends.push(TrendRecord {
            statistic: statistic.to_string(),
            x,
            values,
            rho: t.rho,
            p_value: t.p_value,
            decreasing: t.decreasing_at(TREND_LEVEL),
            required,
        });
    }

    fn finish(mut self) -> Self {
        self.pass = self.points.iter().all(|p| p.pass != Some(false))
            && self.trends.iter().all(|t| !t.required || t.decreasing);
        self
    }

    /// Pretty JSON with every float written to 17 significant digits.
    pub fn to_json(&self) -> String {
        to_json_sig17(self)
    }

    /// One row per ladder rung and statistic.
    pub fn to_csv(&self) -> String {
        let mut s = String::from(CSV_HEADER);
        self.push_csv_rows(&mut s);
        s
    }

    fn push_csv_rows(&self, s: &mut String) {
        let opt = |v: Option<f64>| v.map(fmt_sig17).unwrap_or_default();
        for p in &self.points {
            let tol = match p.tolerance {
                None => String::new(),
                Some(Tolerance::Relative(v)) => format!("relative:{}", fmt_sig17(v)),
                Some(Tolerance::Absolute(v)) => format!("absolute:{}", fmt_sig17(v)),
                Some(Tolerance::Ci99) => "ci99".into(),
                Some(Tolerance::UpperBound99) => "upper_bound99".into(),
            };
            let pass = p.pass.map(|b| b.to_string()).unwrap_or_default();
            s.push_str(&[
                self.estimator.clone(),
                fmt_sig17(p.n),
                fmt_sig17(p.a_n),
                fmt_sig17(p.b_n),
                p.statistic.clone(),
                opt(p.x),
                fmt_sig17(p.estimate),
                fmt_sig17(p.stderr),
                fmt_sig17(p.ci_lo),
                fmt_sig17(p.ci_hi),
                p.reps.to_string(),
                opt(p.reference),
                tol,
                p.censored.to_string(),
                pass,
            ]
            .join(","));
            s.push('\n');
        }
    }
}

const CSV_HEADER: &str =
    "estimator,n,a_n,b_n,statistic,x,estimate,stderr,ci_lo,ci_hi,reps,reference,tolerance,censored,pass\n";

/// CSV of several reports under one header.
pub fn reports_to_csv(reports: &[EstimateReport]) -> String {
    let mut s = String::from(CSV_HEADER);
    for r in reports {
        r.push_csv_rows(&mut s);
    }
    s
}

/// JSON formatter that writes floats as `d.dddddddddddddddde±x`.
struct Sig17Formatter(serde_json::ser::PrettyFormatter<'static>);

macro_rules! delegate {
    ($($name:ident($($arg:ident: $ty:ty),*)),* $(,)?) => {
        $(fn $name<W: ?Sized + io::Write>(&mut self, w: &mut W $(, $arg: $ty)*) -> io::Result<()> {
            self.0.$name(w $(, $arg)*)
        })*
    };
}

impl serde_json::ser::Formatter for Sig17Formatter {
    delegate!(
        begin_array(),
        end_array(),
        begin_array_value(first: bool),
        end_array_value(),
        begin_object(),
        end_object(),
        begin_object_key(first: bool),
        begin_object_value(),
        end_object_value(),
    );

    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        w.write_all(fmt_sig17(value).as_bytes())
    }
}

/// Serializes with [`Sig17Formatter`]; non-finite floats become `null`.
pub fn to_json_sig17<T: Serialize + ?Sized>(value: &T) -> String {
    let mut buf = Vec::new();
    let fmt = Sig17Formatter(serde_json::ser::PrettyFormatter::new());
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, fmt);
    value.serialize(&mut ser).expect("in-memory serialization cannot fail");
    buf.push(b'\n');
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

/// Runs `f` for replications `0..reps` in parallel and returns the results in
/// replication order.
fn replicate<T: Send>(cfg: &ExperimentConfig, f: impl Fn(u64) -> Result<T> + Sync) -> Result<Vec<T>> {
    let work = || (0..cfg.reps).into_par_iter().map(&f).collect::<Result<Vec<T>>>();
    match cfg.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| LabError::Config(format!("cannot start {t} worker threads: {e}")))?
            .install(work),
        None => work(),
    }
}

fn sample_input(cfg: &ExperimentConfig, n: f64, stream: RngStream) -> Result<PointSet> {
    match cfg.input {
        InputKind::Poisson => sample_poisson_process(n, cfg.dim(), stream),
        InputKind::Binomial => Ok(sample_binomial_process(n as usize, cfg.dim(), stream)),
    }
}

struct Rung {
    p: ProcessParams,
    b_n: f64,
}

impl Rung {
    fn new(cfg: &ExperimentConfig, j: usize) -> Result<Self> {
        let p = cfg.params(j)?;
        Ok(Rung {
            b_n: scaling_b_n(p.n, p.a_n, p.k),
            p,
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn record(
        &self,
        statistic: &str,
        x: Option<f64>,
        estimate: f64,
        stderr: f64,
        reps: u64,
        reference: Option<f64>,
        tolerance: Option<Tolerance>,
        censored: bool,
    ) -> PointRecord {
        let (ci_lo, ci_hi) = (estimate - Z99 * stderr, estimate + Z99 * stderr);
        let pass = match (reference, tolerance) {
            (Some(r), Some(tol)) if !censored => Some(match tol {
                Tolerance::Relative(v) => (estimate - r).abs() <= v * r.abs(),
                Tolerance::Absolute(v) => (estimate - r).abs() <= v,
                Tolerance::Ci99 => ci_lo <= r && r <= ci_hi,
                Tolerance::UpperBound99 => ci_lo <= r,
            }),
            _ => None,
        };
        PointRecord {
            n: self.p.n,
            a_n: self.p.a_n,
            b_n: self.b_n,
            statistic: statistic.to_string(),
            x,
            estimate,
            stderr,
            ci_lo,
            ci_hi,
            reps,
            reference,
            tolerance,
            censored,
            pass,
        }
    }
}

/// Runs one estimator over the configured ladder.
pub fn run(config: &ExperimentConfig, estimator_id: &str) -> Result<EstimateReport> {
    let est: Estimator = estimator_id.parse()?;
    run_estimator(config, est)
}

pub fn run_estimator(config: &ExperimentConfig, est: Estimator) -> Result<EstimateReport> {
    config.validate()?;
    match est {
        Estimator::MeanT => estimate_mean_t(config),
        Estimator::CountPmfTv => estimate_count_pmf_tv(config),
        Estimator::RareEvent => estimate_rare_event(config),
        Estimator::RateCurve => estimate_rate_curve(config),
        Estimator::Intensity => estimate_intensity_check(config),
        Estimator::Blocking => estimate_blocking_gap(config),
        Estimator::M0Functional => estimate_m0_functional(config),
        Estimator::Coupling => estimate_coupling_failure(config),
    }
}

/// Low-degree counts `T` at threshold `r_n(s0)` for every replication.
fn low_degree_counts(cfg: &ExperimentConfig, est: Estimator, j: usize, rung: &Rung) -> Result<Vec<u64>> {
    let r = rung.p.radius(cfg.s0)?;
    replicate(cfg, |i| {
        let ps = sample_input(cfg, rung.p.n, RngStream::derive(cfg.seed, est.tag(), j as u16, i))?;
        Ok(count_low_degree(&ps, r, cfg.k)? as u64)
    })
}

/// Mean of the low-degree count against `n P(Poisson(a_n + s0) <= k - 1)`.
///
/// With Poisson input the identity is exact and the reference must fall in
/// the 99% interval. With binomial input the same Poisson reference is only a
/// limit, checked at the top rung with a 5% relative tolerance.
pub fn estimate_mean_t(cfg: &ExperimentConfig) -> Result<EstimateReport> {
    cfg.validate()?;
    let est = Estimator::MeanT;
    let mut rep = EstimateReport::new(est, cfg);
    let last = cfg.n_ladder.len() - 1;
    for j in 0..=last {
        let rung = Rung::new(cfg, j)?;
        let t = low_degree_counts(cfg, est, j, &rung)?;
        let s = Summary::from_counts(&t);
        let reference = expected_low_degree_count(rung.p.n, rung.p.a_n, cfg.k, cfg.s0)?;
        let tol = match cfg.input {
            InputKind::Poisson => Some(Tolerance::Ci99),
            InputKind::Binomial if j == last => Some(Tolerance::Relative(0.05)),
            InputKind::Binomial => None,
        };
        rep.points
            .push(rung.record("mean_t", None, s.mean, s.stderr, cfg.reps, Some(reference), tol, false));
        if cfg.input == InputKind::Binomial {
            let gap = (s.mean - reference).abs() / reference;
            rep.points
                .push(rung.record("relative_gap", None, gap, s.stderr / reference, cfg.reps, None, None, false));
        }
    }
    if cfg.input == InputKind::Binomial {
        rep.add_trend("relative_gap", None, false);
    }
    Ok(rep.finish())
}

/// Total variation between the empirical law of `T` and
/// `Poisson(b_n alpha_k)`. The `stderr` column holds the expected TV of an
/// exact Poisson sample of the same size (the noise floor).
pub fn estimate_count_pmf_tv(cfg: &ExperimentConfig) -> Result<EstimateReport> {
    cfg.validate()?;
    let est = Estimator::CountPmfTv;
    let mut rep = EstimateReport::new(est, cfg);
    let last = cfg.n_ladder.len() - 1;
    let alpha = alpha_k(cfg.k, cfg.s0);
    for j in 0..=last {
        let rung = Rung::new(cfg, j)?;
        let t = low_degree_counts(cfg, est, j, &rung)?;
        let lam = rung.b_n * alpha;
        let tv = tv_to_poisson(&empirical_pmf(&t), lam);
        let floor = tv_noise_floor(lam, t.len());
        let tol = (j == last).then_some(Tolerance::Absolute(0.05));
        rep.points
            .push(rung.record("count_tv", None, tv, floor, cfg.reps, Some(0.0), tol, false));
        let s = Summary::from_counts(&t);
        rep.points
            .push(rung.record("mean_t", None, s.mean, s.stderr, cfg.reps, Some(lam), None, false));
    }
    rep.add_trend("count_tv", None, true);
    Ok(rep.finish())
}

/// `-(1/b_n) log P(T / b_n >= x)` above `alpha_k`, `<= x` below, against the
/// exact Poisson tail and the rate function `I_k`.
pub fn estimate_rate_curve(cfg: &ExperimentConfig) -> Result<EstimateReport> {
    cfg.validate()?;
    let est = Estimator::RateCurve;
    let mut rep = EstimateReport::new(est, cfg);
    let last = cfg.n_ladder.len() - 1;
    let alpha = alpha_k(cfg.k, cfg.s0);
    for j in 0..=last {
        let rung = Rung::new(cfg, j)?;
        let t = low_degree_counts(cfg, est, j, &rung)?;
        let b = rung.b_n;
        for &xm in &cfg.x_grid {
            let x = xm * alpha;
            let hits = t
                .iter()
                .filter(|&&v| if x >= alpha { v as f64 >= x * b } else { v as f64 <= x * b })
                .count() as u64;
            let censored = hits == 0;
            let p = if censored {
                0.5 / cfg.reps as f64
            } else {
                proportion(hits, cfg.reps).0
            };
            let rate = -p.ln() / b;
            // delta method on log p
            let se = ((1.0 - p) / (cfg.reps as f64 * p)).sqrt() / b;
            let oracle = poisson_tail_rate(b, x, cfg.k, cfg.s0)?;
            let tol = (j == last).then_some(Tolerance::Ci99);
            rep.points
                .push(rung.record("empirical_rate", Some(xm), rate, se, cfg.reps, Some(oracle), tol, censored));
            rep.points
                .push(rung.record("poisson_oracle", Some(xm), oracle, 0.0, 0, Some(rate_i_k(x, cfg.k, cfg.s0)), None, false));
            let gap = (rate - rate_i_k(x, cfg.k, cfg.s0)).abs();
            rep.points.push(rung.record("rate_gap", Some(xm), gap, se, cfg.reps, None, None, censored));
            if censored {
                rep.warnings.push(format!(
                    "n = {}: no replication reached x = {xm} alpha_k; the rate is a censored bound",
                    rung.p.n
                ));
            }
        }
    }
    for &xm in &cfg.x_grid.clone() {
        // the bulk point x = alpha_k has I_k = 0 and its gap is pure noise
        let censored = rep.series("rate_gap", Some(xm)).iter().any(|p| p.censored);
        rep.add_trend("rate_gap", Some(xm), xm != 1.0 && !censored);
    }
    Ok(rep.finish())
}

/// Per-replication outcome of the regime-2 simulation: whether `T >= 1`, and
/// the plateau functional `F(L)`.
fn rare_event_draws(cfg: &ExperimentConfig, j: usize, rung: &Rung) -> Result<Vec<(bool, f64)>> {
    let tag = Estimator::RareEvent.tag();
    let (u1, u2) = plateaus(cfg);
    replicate(cfg, |i| {
        let ps = sample_input(cfg, rung.p.n, RngStream::derive(cfg.seed, tag, j as u16, i))?;
        let l = build_l(&rung.p, &ps)?;
        let hit = !l.is_empty();
        let f = if hit {
            let mut v = [0.0, 0.0];
            for (x, m) in l.atoms() {
                v[0] += u1.value(x, m);
                v[1] += u2.value(x, m);
            }
            m0_test_value(v, cfg.eps_pair)
        } else {
            0.0
        };
        Ok((hit, f))
    })
}

fn plateaus(cfg: &ExperimentConfig) -> (Plateau, Plateau) {
    let p = &cfg.plateau;
    let u = Plateau::full(p.height, cfg.dim(), p.u_lo, p.u_hi);
    (u.clone(), u)
}

fn check_binomial_schedule(cfg: &ExperimentConfig, rep: &mut EstimateReport) -> Result<()> {
    if cfg.input != InputKind::Binomial {
        return Ok(());
    }
    for (&n, a) in cfg.n_ladder.iter().zip(cfg.a_values()) {
        if a > n.cbrt() {
            return Err(LabError::Config(format!(
                "binomial rare-event input needs a_n <= n^(1/3); a_n = {a} at n = {n}"
            )));
        }
    }
    rep.warnings
        .push("binomial input: a_n = o(n^(1/3)) is checked as a_n <= n^(1/3) on the ladder".into());
    Ok(())
}

fn rare_event_record(cfg: &ExperimentConfig, j: usize, rung: &Rung, draws: &[(bool, f64)], rep: &mut EstimateReport) {
    let last = cfg.n_ladder.len() - 1;
    let alpha = alpha_k(cfg.k, cfg.s0);
    let hits = draws.iter().filter(|d| d.0).count() as u64;
    let (p, se) = proportion(hits, cfg.reps);
    let expected = cfg.reps as f64 * rung.b_n * alpha;
    if expected < MIN_EXPECTED_HITS {
        rep.warnings.push(format!(
            "n = {}: about {expected:.3} expected hits at {} replications; the ratio is unreliable",
            rung.p.n, cfg.reps
        ));
    }
    // binomial input is the de-Poissonization check, held to 5%
    let rel = match cfg.input {
        InputKind::Poisson => 0.15,
        InputKind::Binomial => 0.05,
    };
    let tol = (j == last).then_some(Tolerance::Relative(rel));
    rep.points.push(rung.record(
        "rare_event_ratio",
        None,
        p / rung.b_n,
        se / rung.b_n,
        cfg.reps,
        Some(alpha),
        tol,
        false,
    ));
}

/// `P(T >= 1) / b_n` against `alpha_k`.
pub fn estimate_rare_event(cfg: &ExperimentConfig) -> Result<EstimateReport> {
    cfg.validate()?;
    let mut rep = EstimateReport::new(Estimator::RareEvent, cfg);
    check_binomial_schedule(cfg, &mut rep)?;
    for j in 0..cfg.n_ladder.len() {
        let rung = Rung::new(cfg, j)?;
        let draws = rare_event_draws(cfg, j, &rung)?;
        rare_event_record(cfg, j, &rung, &draws, &mut rep);
    }
    Ok(rep.finish())
}

/// `b_n^{-1} E F(L)` for the plateau functional against its limit; the
/// rare-event ratio of the same replications is reported alongside.
pub fn estimate_m0_functional(cfg: &ExperimentConfig) -> Result<EstimateReport> {
    cfg.validate()?;
    let mut rep = EstimateReport::new(Estimator::M0Functional, cfg);
    check_binomial_schedule(cfg, &mut rep)?;
    let last = cfg.n_ladder.len() - 1;
    let (u1, u2) = plateaus(cfg);
    let reference = m0_limit_functional(&u1, &u2, cfg.eps_pair, cfg.k, cfg.dim());
    for j in 0..=last {
        let rung = Rung::new(cfg, j)?;
        let draws = rare_event_draws(cfg, j, &rung)?;
        let f: Vec<f64> = draws.iter().map(|d| d.1).collect();
        let s = Summary::from_values(&f);
        let tol = (j == last).then_some(if reference == 0.0 {
            Tolerance::Absolute(0.0)
        } else {
            Tolerance::Relative(0.15)
        });
        rep.points.push(rung.record(
            "m0_functional",
            None,
            s.mean / rung.b_n,
            s.stderr / rung.b_n,
            cfg.reps,
            Some(reference),
            tol,
            false,
        ));
        rare_event_record(cfg, j, &rung, &draws, &mut rep);
    }
    Ok(rep.finish())
}

/// Mean of `L(B x (u, inf))` for `B = [0, side]^d` against the exact
/// intensity tail.
pub fn estimate_intensity_check(cfg: &ExperimentConfig) -> Result<EstimateReport> {
    cfg.validate()?;
    let est = Estimator::Intensity;
    let mut rep = EstimateReport::new(est, cfg);
    let lo = vec![0.0; cfg.d];
    let hi = vec![cfg.box_side; cfg.d];
    let leb = cfg.box_side.powi(cfg.d as i32);
    for j in 0..cfg.n_ladder.len() {
        let rung = Rung::new(cfg, j)?;
        let counts: Vec<Vec<u64>> = replicate(cfg, |i| {
            if cfg.box_side == 0.0 {
                return Ok(vec![0; cfg.u_offsets.len()]);
            }
            let ps = sample_input(cfg, rung.p.n, RngStream::derive(cfg.seed, est.tag(), j as u16, i))?;
            let l = build_l(&rung.p, &ps)?;
            Ok(cfg
                .u_offsets
                .iter()
                .map(|&du| l.count_in(&lo, &hi, cfg.s0 + du) as u64)
                .collect())
        })?;
        for (c, &du) in cfg.u_offsets.iter().enumerate() {
            let column: Vec<u64> = counts.iter().map(|v| v[c]).collect();
            let s = Summary::from_counts(&column);
            let u = cfg.s0 + du;
            let reference = intensity_tail(rung.p.n, rung.p.a_n, cfg.k, u, leb)?;
            rep.points.push(rung.record(
                "intensity_tail",
                Some(u),
                s.mean,
                s.stderr,
                cfg.reps,
                Some(reference),
                Some(Tolerance::Ci99),
                false,
            ));
        }
    }
    Ok(rep.finish())
}

/// The three blocking discrepancies: `b_eff^{-1} E d_TV(L, eta)`,
/// `b_eff^{-1} E d_TV(eta, eta')`, and the TV between the pooled per-cube
/// count law and `Poisson(alpha_k)`.
pub fn estimate_blocking_gap(cfg: &ExperimentConfig) -> Result<EstimateReport> {
    cfg.validate()?;
    let est = Estimator::Blocking;
    let mut rep = EstimateReport::new(est, cfg);
    let alpha = alpha_k(cfg.k, cfg.s0);
    for j in 0..cfg.n_ladder.len() {
        let rung = Rung::new(cfg, j)?;
        let w = cfg.w_rule.value(rung.p.a_n);
        let bcfg = BlockedConfig::for_params(&rung.p, cfg.b_target.unwrap_or(rung.b_n), w)
            .map_err(|e| LabError::Config(format!("n = {}: {e}", rung.p.n)))?;
        let b_eff = bcfg.partition.b_eff() as f64;
        let draws: Vec<(f64, f64, Vec<u64>)> = replicate(cfg, |i| {
            let ps = sample_input(cfg, rung.p.n, RngStream::derive(cfg.seed, est.tag(), j as u16, i))?;
            let l = build_l(&rung.p, &ps)?;
            let eta = build_eta(&rung.p, &ps, &bcfg)?;
            let eta_t = build_eta_truncated(&rung.p, &ps, &bcfg)?;
            let counts = per_cube_counts(&rung.p, &ps, &bcfg)?;
            Ok((
                tv_distance_atomic(&l, &eta)? / b_eff,
                tv_distance_atomic(&eta, &eta_t)? / b_eff,
                counts.into_iter().map(|c| c as u64).collect(),
            ))
        })?;
        let s1 = Summary::from_values(&draws.iter().map(|d| d.0).collect::<Vec<_>>());
        let s2 = Summary::from_values(&draws.iter().map(|d| d.1).collect::<Vec<_>>());
        let pooled: Vec<u64> = draws.iter().flat_map(|d| d.2.iter().copied()).collect();
        let tv = tv_to_poisson(&empirical_pmf(&pooled), alpha);
        let floor = tv_noise_floor(alpha, pooled.len());
        rep.points.push(rung.record("tv_l_eta", None, s1.mean, s1.stderr, cfg.reps, None, None, false));
        rep.points
            .push(rung.record("tv_eta_eta_truncated", None, s2.mean, s2.stderr, cfg.reps, None, None, false));
        rep.points.push(rung.record("cube_count_tv", None, tv, floor, cfg.reps, None, None, false));
        rep.points.push(rung.record("b_eff", None, b_eff, 0.0, 0, None, None, false));
        rep.points.push(rung.record("shell", None, bcfg.shell, 0.0, 0, None, None, false));
    }
    for s in ["tv_l_eta", "tv_eta_eta_truncated", "cube_count_tv"] {
        rep.add_trend(s, None, true);
    }
    Ok(rep.finish())
}

/// Frequency of a failed sandwich `thinned ⊆ B_n ⊆ augmented` against the
/// analytic bound, with `eps = cfg.eps * a_n`.
pub fn estimate_coupling_failure(cfg: &ExperimentConfig) -> Result<EstimateReport> {
    cfg.validate()?;
    let est = Estimator::Coupling;
    let mut rep = EstimateReport::new(est, cfg);
    for j in 0..cfg.n_ladder.len() {
        let rung = Rung::new(cfg, j)?;
        let n = rung.p.n;
        if n.fract() != 0.0 || rung.p.a_n <= 0.0 {
            return Err(LabError::Config(format!(
                "coupling needs integer n and a_n > 0; got n = {n}, a_n = {}",
                rung.p.a_n
            )));
        }
        let eps = cfg.eps * rung.p.a_n;
        let eta = cfg.eps;
        let fails: Vec<bool> = replicate(cfg, |i| {
            let mut rng = RngStream::derive(cfg.seed, est.tag(), j as u16, i).rng();
            // thinning keeps intensity n (1 - eta), augmentation adds n eta
            let base = sample_poisson_with(n, cfg.dim(), &mut rng)?;
            let triple = sample_coupled_with(&base, n, eta, &mut rng)?;
            let binom = draw_sandwiched_with(&triple, n as usize, &mut rng);
            Ok(!sandwich_holds(&triple, &binom))
        })?;
        let hits = fails.iter().filter(|&&f| f).count() as u64;
        let (p, se) = proportion(hits, cfg.reps);
        let bound = sandwich_failure_bound(n, rung.p.a_n, eps)?;
        rep.points.push(rung.record(
            "failure_prob",
            Some(cfg.eps),
            p,
            se,
            cfg.reps,
            Some(bound),
            Some(Tolerance::UpperBound99),
            false,
        ));
    }
    rep.add_trend("failure_prob", Some(cfg.eps), false);
    Ok(rep.finish())
}

/// Regime classification of the configured schedule along the ladder.
pub fn regime_report(cfg: &ExperimentConfig) -> Result<RegimeReport> {
    cfg.validate()?;
    regime_diagnostic(&cfg.n_ladder, &cfg.a_values(), cfg.k)
}

/// One entry of the acceptance battery run by `suite`.
#[derive(Debug, Clone)]
pub struct SuiteEntry {
    pub label: &'static str,
    pub estimator: Estimator,
    pub config: ExperimentConfig,
}

/// The battery behind the `suite` subcommand. The quick variant keeps every
/// configuration but cuts replications and ladder sizes.
pub fn suite_plan(quick: bool, seed: u64) -> Vec<SuiteEntry> {
    let base = ExperimentConfig {
        seed,
        ..ExperimentConfig::default()
    };
    let scale = |full: u64, fast: u64| if quick { fast } else { full };
    let regime1 = if quick {
        vec![500.0, 1000.0, 2000.0, 5000.0, 10_000.0]
    } else {
        vec![2000.0, 5000.0, 10_000.0, 20_000.0, 50_000.0]
    };
    let m0_n = if quick { 1000.0 } else { 10_000.0 };
    let mut plan = vec![
        SuiteEntry {
            label: "mecke-mean-d2-k1",
            estimator: Estimator::MeanT,
            config: ExperimentConfig {
                d: 2,
                n_ladder: vec![1000.0],
                reps: scale(100_000, 2000),
                ..base.clone()
            },
        },
        SuiteEntry {
            label: "mecke-mean-d2-k2",
            estimator: Estimator::MeanT,
            config: ExperimentConfig {
                d: 2,
                k: 2,
                n_ladder: vec![1000.0],
                reps: scale(100_000, 2000),
                ..base.clone()
            },
        },
        SuiteEntry {
            label: "mecke-mean-d1-k3",
            estimator: Estimator::MeanT,
            config: ExperimentConfig {
                k: 3,
                s0: 0.5,
                n_ladder: vec![2000.0],
                a_schedule: ASchedule::Constant(6.0),
                reps: scale(100_000, 2000),
                ..base.clone()
            },
        },
        SuiteEntry {
            label: "intensity-tail",
            estimator: Estimator::Intensity,
            config: ExperimentConfig {
                d: 2,
                n_ladder: vec![1000.0],
                reps: scale(100_000, 2000),
                ..base.clone()
            },
        },
        SuiteEntry {
            label: "poisson-superposition",
            estimator: Estimator::CountPmfTv,
            config: ExperimentConfig {
                n_ladder: if quick {
                    regime1.clone()
                } else {
                    vec![2000.0, 5850.0, 17_100.0, 50_000.0]
                },
                a_schedule: ASchedule::Fraction(0.6),
                reps: scale(400_000, 2000),
                ..base.clone()
            },
        },
        SuiteEntry {
            label: "rate-curve",
            estimator: Estimator::RateCurve,
            config: ExperimentConfig {
                // b_n just above 10 at n = 3e5; the count's excess variance
                // over Poisson decays like sqrt(b_n / n)
                n_ladder: if quick { vec![1000.0, 10_000.0] } else { vec![1000.0, 10_000.0, 300_000.0] },
                a_schedule: ASchedule::Fraction(0.817),
                reps: scale(100_000, 2000),
                x_grid: vec![0.5, 1.0, 1.5, 2.0],
                ..base.clone()
            },
        },
        SuiteEntry {
            label: "m0-rare-event",
            estimator: Estimator::M0Functional,
            config: ExperimentConfig {
                n_ladder: vec![m0_n],
                a_schedule: ASchedule::Power(1.5),
                reps: scale(1_000_000, 20_000),
                ..base.clone()
            },
        },
        SuiteEntry {
            label: "blocking",
            estimator: Estimator::Blocking,
            config: ExperimentConfig {
                n_ladder: regime1.clone(),
                a_schedule: ASchedule::Fraction(0.6),
                reps: scale(20_000, 200),
                ..base.clone()
            },
        },
        SuiteEntry {
            label: "binomial-mean",
            estimator: Estimator::MeanT,
            config: ExperimentConfig {
                n_ladder: regime1,
                a_schedule: ASchedule::Fraction(0.6),
                input: InputKind::Binomial,
                reps: scale(10_000, 500),
                ..base.clone()
            },
        },
        SuiteEntry {
            label: "binomial-rare-event",
            estimator: Estimator::RareEvent,
            config: ExperimentConfig {
                // a_n <= n^(1/3) needs n >= 1.9e3 under 1.5 log n
                n_ladder: if quick { vec![2000.0] } else { vec![2000.0, 10_000.0] },
                a_schedule: ASchedule::Power(1.5),
                input: InputKind::Binomial,
                reps: scale(500_000, 20_000),
                ..base.clone()
            },
        },
    ];
    for ratio in [0.25, 0.5] {
        plan.push(SuiteEntry {
            label: if ratio == 0.25 { "coupling-0.25" } else { "coupling-0.5" },
            estimator: Estimator::Coupling,
            config: ExperimentConfig {
                n_ladder: vec![500.0, 5000.0],
                // a_n = log n
                a_schedule: ASchedule::Boundary(0.0),
                eps: ratio,
                reps: scale(10_000, 300),
                ..base.clone()
            },
        });
    }
    plan
}

/// Runs the whole battery.
pub fn run_suite(quick: bool, seed: u64, threads: Option<usize>) -> Result<Vec<EstimateReport>> {
    suite_plan(quick, seed)
        .into_iter()
        .map(|mut e| {
            e.config.threads = threads;
            run_estimator(&e.config, e.estimator)
        })
        .collect()
}
