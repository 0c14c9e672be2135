//! Command-line front end: flag and config-file parsing, dispatch to the
//! estimators, and report emission.
//!
//! Exit codes: 0 on success, 1 on any configuration or I/O error (including
//! an unknown subcommand), 2 when `--check` is set and a report fails.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use crate::analytic::{alpha_k, poisson_tail_rate, rate_i_k};
use crate::error::{LabError, Result};
use crate::experiments::{
    reports_to_csv, run_estimator, run_suite, suite_plan, to_json_sig17, ASchedule, EstimateReport, Estimator,
    ExperimentConfig, InputKind, PlateauSpec, WRule,
};
use crate::process::{build_l, fmt_sig17, points_to_csv, ProcessParams};
use crate::rng::RngStream;
use crate::sampling::{sample_binomial_process, sample_poisson_process};
use crate::torus::Dimension;

#[derive(Debug, Parser)]
#[command(
    name = "knnball-lab",
    version,
    about = "Monte Carlo and analytic checks for k-nearest-neighbor ball volumes on the flat torus"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a sampled point set (or its marked process) as CSV.
    Sample(SampleArgs),
    /// Mean of the low-degree count against the exact finite-n mean.
    MeanT(ExpArgs),
    /// Total variation of the count law to its Poisson limit.
    PmfTv(ExpArgs),
    /// Rescaled probability of at least one large ball.
    RareEvent(ExpArgs),
    /// Empirical large-deviation rate curve.
    RateCurve(ExpArgs),
    /// Mean of the marked process on a box against its intensity.
    Intensity(ExpArgs),
    /// Discrepancies introduced by the subcube decomposition.
    Blocking(ExpArgs),
    /// Rare-event limit functional of a plateau test function.
    M0(ExpArgs),
    /// Failure frequency of the thinning/augmentation sandwich.
    Coupling(ExpArgs),
    /// Evaluate the rate function I_k(x) (and its exact Poisson counterpart).
    RateFunction(RateArgs),
    /// Classify the regime of a centering schedule along a ladder.
    Regime(ExpArgs),
    /// Run the whole acceptance battery.
    Suite(SuiteArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SampleKind {
    Poisson,
    Binomial,
    Marked,
}

#[derive(Debug, Args)]
struct SampleArgs {
    #[arg(long, value_enum, default_value = "poisson")]
    kind: SampleKind,
    /// Intensity (Poisson, marked) or point count (binomial).
    #[arg(long)]
    n: f64,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    k: usize,
    /// Centering a_n of the marks (marked only).
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    a: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    s0: f64,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RateArgs {
    /// Neighbor order k.
    #[arg(long, default_value_t = 1)]
    k: usize,
    /// Mark threshold s0.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    s0: f64,
    /// Point at which to evaluate the rate (absolute, not a multiple of alpha_k).
    #[arg(long)]
    x: f64,
    /// Also print the exact Poisson tail rate at this b.
    #[arg(long)]
    b: Option<f64>,
}

#[derive(Debug, Args)]
struct SuiteArgs {
    /// Reduced replication counts for a fast smoke run.
    #[arg(long)]
    quick: bool,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Worker threads; all cores when absent.
    #[arg(long)]
    threads: Option<usize>,
    /// Directory for report.json, report.csv and meta.json; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Exit with status 2 if any report fails.
    #[arg(long)]
    check: bool,
}

#[derive(Debug, Args, Default)]
struct ExpArgs {
    /// Flat TOML file with experiment settings; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Torus dimension d.
    #[arg(long)]
    dim: Option<usize>,
    /// Neighbor order k.
    #[arg(long)]
    k: Option<usize>,
    /// Mark threshold s0.
    #[arg(long, allow_hyphen_values = true)]
    s0: Option<f64>,
    /// Comma-separated increasing intensities.
    #[arg(long, value_delimiter = ',')]
    n_ladder: Option<Vec<f64>>,
    /// Single-rung ladder.
    #[arg(long, conflicts_with = "n_ladder")]
    n: Option<f64>,
    /// fraction | boundary | power | constant | explicit
    #[arg(long)]
    a_rule: Option<String>,
    /// Parameter(s) of the a-rule; one value per rung for `explicit`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    a_param: Option<Vec<f64>>,
    /// Constant centering; shorthand for `--a-rule constant --a-param A`.
    #[arg(long, conflicts_with_all = ["a_rule", "a_param"], allow_hyphen_values = true)]
    a: Option<f64>,
    /// Replications per ladder rung.
    #[arg(long)]
    reps: Option<u64>,
    /// Master seed of every random stream.
    #[arg(long)]
    seed: Option<u64>,
    /// Coupling eps as a fraction of a_n.
    #[arg(long)]
    eps: Option<f64>,
    /// sqrt | power:P | constant:C
    #[arg(long)]
    w_rule: Option<String>,
    /// Input process.
    #[arg(long, value_enum)]
    input: Option<InputArg>,
    /// Rate-curve abscissae as multiples of alpha_k.
    #[arg(long, value_delimiter = ',')]
    x_grid: Option<Vec<f64>>,
    /// Intensity-check mark levels as offsets above s0.
    #[arg(long, value_delimiter = ',')]
    u_offsets: Option<Vec<f64>>,
    /// Side of the box [0, side]^d for the intensity check.
    #[arg(long)]
    box_side: Option<f64>,
    /// Height of the plateau test function.
    #[arg(long)]
    plateau_height: Option<f64>,
    /// Plateau mark interval `lo,hi`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    plateau_u: Option<Vec<f64>>,
    /// Offsets `e1,e2` subtracted from the two plateau integrals.
    #[arg(long, value_delimiter = ',')]
    eps_pair: Option<Vec<f64>>,
    /// Number of blocking cubes to aim for; b_n when absent.
    #[arg(long)]
    b_target: Option<f64>,
    /// Worker threads; all cores when absent.
    #[arg(long)]
    threads: Option<usize>,
    /// Directory for report.json, report.csv and meta.json; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Exit with status 2 if the report fails.
    #[arg(long)]
    check: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum, Deserialize)]
#[serde(rename_all = "snake_case")]
enum InputArg {
    Poisson,
    Binomial,
}

impl From<InputArg> for InputKind {
    fn from(v: InputArg) -> Self {
        match v {
            InputArg::Poisson => InputKind::Poisson,
            InputArg::Binomial => InputKind::Binomial,
        }
    }
}

/// Keys accepted in a `--config` file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    dim: Option<usize>,
    k: Option<usize>,
    s0: Option<f64>,
    n_ladder: Option<Vec<f64>>,
    a_rule: Option<String>,
    a_param: Option<Vec<f64>>,
    reps: Option<u64>,
    seed: Option<u64>,
    eps: Option<f64>,
    w_rule: Option<String>,
    input: Option<InputArg>,
    x_grid: Option<Vec<f64>>,
    u_offsets: Option<Vec<f64>>,
    box_side: Option<f64>,
    plateau_height: Option<f64>,
    plateau_u: Option<Vec<f64>>,
    eps_pair: Option<Vec<f64>>,
    b_target: Option<f64>,
    threads: Option<usize>,
}

fn parse_w_rule(s: &str) -> Result<WRule> {
    match s.split_once(':') {
        None => WRule::from_rule(s, &[]),
        Some((rule, p)) => {
            let v: f64 = p
                .parse()
                .map_err(|_| LabError::Config(format!("bad w-rule parameter `{p}`")))?;
            WRule::from_rule(rule, &[v])
        }
    }
}

fn pair(v: &[f64], what: &str) -> Result<[f64; 2]> {
    match v {
        [a, b] => Ok([*a, *b]),
        _ => Err(LabError::Config(format!("{what} takes exactly two values"))),
    }
}

impl ExpArgs {
    fn to_config(&self) -> Result<ExperimentConfig> {
        let file: ConfigFile = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| LabError::Config(format!("cannot read {}: {e}", path.display())))?;
                toml::from_str(&text).map_err(|e| LabError::Config(format!("{}: {e}", path.display())))?
            }
            None => ConfigFile::default(),
        };
        let mut c = ExperimentConfig::default();
        macro_rules! set {
            ($field:ident, $flag:expr, $file:expr) => {
                if let Some(v) = $flag.clone().or($file.clone()) {
                    c.$field = v;
                }
            };
        }
        set!(d, self.dim, file.dim);
        set!(k, self.k, file.k);
        set!(s0, self.s0, file.s0);
        set!(reps, self.reps, file.reps);
        set!(seed, self.seed, file.seed);
        set!(eps, self.eps, file.eps);
        set!(x_grid, self.x_grid, file.x_grid);
        set!(u_offsets, self.u_offsets, file.u_offsets);
        set!(box_side, self.box_side, file.box_side);
        if let Some(n) = self.n {
            c.n_ladder = vec![n];
        } else if let Some(l) = self.n_ladder.clone().or(file.n_ladder) {
            c.n_ladder = l;
        }
        if let Some(a) = self.a {
            c.a_schedule = ASchedule::Constant(a);
        } else {
            let rule = self.a_rule.clone().or(file.a_rule);
            let param = self.a_param.clone().or(file.a_param);
            match (rule, param) {
                (Some(r), Some(p)) => c.a_schedule = ASchedule::from_rule(&r, &p)?,
                (Some(r), None) => c.a_schedule = ASchedule::from_rule(&r, &[])?,
                (None, Some(_)) => return Err(LabError::Config("--a-param needs --a-rule".into())),
                (None, None) => {}
            }
        }
        if let Some(w) = self.w_rule.clone().or(file.w_rule) {
            c.w_rule = parse_w_rule(&w)?;
        }
        if let Some(i) = self.input.or(file.input) {
            c.input = i.into();
        }
        if let Some(h) = self.plateau_height.or(file.plateau_height) {
            c.plateau.height = h;
        }
        if let Some(u) = self.plateau_u.clone().or(file.plateau_u) {
            let [lo, hi] = pair(&u, "plateau-u")?;
            c.plateau = PlateauSpec { u_lo: lo, u_hi: hi, ..c.plateau };
        } else if let Some(s0) = self.s0.or(file.s0) {
            // the default plateau sits on [s0, s0 + 1]
            c.plateau.u_lo = s0;
            c.plateau.u_hi = s0 + 1.0;
        }
        if let Some(e) = self.eps_pair.clone().or(file.eps_pair) {
            c.eps_pair = pair(&e, "eps-pair")?;
        }
        c.b_target = self.b_target.or(file.b_target);
        c.threads = self.threads.or(file.threads);
        c.validate()?;
        Ok(c)
    }
}

struct Outcome {
    passed: bool,
}

fn write_outputs(dir: &Path, json: &str, csv: &str, meta: &serde_json::Value) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("report.json"), json)?;
    fs::write(dir.join("report.csv"), csv)?;
    fs::write(dir.join("meta.json"), to_json_sig17(meta))?;
    Ok(())
}

fn meta(command: &str, started: Instant) -> serde_json::Value {
    let now = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    serde_json::json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "finished_unix": now,
        "elapsed_secs": started.elapsed().as_secs_f64(),
    })
}

fn emit_reports(
    command: &str,
    reports: &[EstimateReport],
    out: Option<&Path>,
    started: Instant,
    stdout: &mut dyn Write,
) -> Result<Outcome> {
    let (json, csv) = match reports {
        [single] => (single.to_json(), single.to_csv()),
        many => (to_json_sig17(many), reports_to_csv(many)),
    };
    match out {
        Some(dir) => write_outputs(dir, &json, &csv, &meta(command, started))?,
        None => stdout.write_all(json.as_bytes())?,
    }
    Ok(Outcome {
        passed: reports.iter().all(|r| r.pass),
    })
}

fn experiment(
    est: Estimator,
    args: &ExpArgs,
    started: Instant,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<Outcome> {
    let cfg = args.to_config()?;
    let report = run_estimator(&cfg, est)?;
    for w in &report.warnings {
        writeln!(stderr, "warning: {w}")?;
    }
    emit_reports(est.id(), std::slice::from_ref(&report), args.out.as_deref(), started, stdout)
}

fn sample(args: &SampleArgs, stdout: &mut dyn Write) -> Result<()> {
    let dim = Dimension::new(args.dim)?;
    let stream = RngStream::new(args.seed, 0);
    let text = match args.kind {
        SampleKind::Poisson => points_to_csv(&sample_poisson_process(args.n, dim, stream)?),
        SampleKind::Binomial => {
            if !(args.n >= 0.0) || args.n.fract() != 0.0 {
                return Err(LabError::Config(format!("binomial sample needs an integer count, got {}", args.n)));
            }
            points_to_csv(&sample_binomial_process(args.n as usize, dim, stream))
        }
        SampleKind::Marked => {
            let p = ProcessParams::new(args.n, args.a, args.k, args.s0, dim)?;
            build_l(&p, &sample_poisson_process(args.n, dim, stream)?)?.to_csv()
        }
    };
    match &args.out {
        Some(path) => fs::write(path, text)?,
        None => stdout.write_all(text.as_bytes())?,
    }
    Ok(())
}

fn rate_function(args: &RateArgs, stdout: &mut dyn Write) -> Result<()> {
    if args.k == 0 {
        return Err(LabError::Config("k must be at least 1".into()));
    }
    let i = rate_i_k(args.x, args.k, args.s0);
    match args.b {
        None => writeln!(stdout, "{i}")?,
        Some(b) => {
            let oracle = poisson_tail_rate(b, args.x, args.k, args.s0)?;
            writeln!(stdout, "I_k = {}", fmt_sig17(i))?;
            writeln!(stdout, "alpha_k = {}", fmt_sig17(alpha_k(args.k, args.s0)))?;
            writeln!(stdout, "poisson_oracle(b = {b}) = {}", fmt_sig17(oracle))?;
        }
    }
    Ok(())
}

fn dispatch(cli: Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(bool, bool)> {
    let started = Instant::now();
    let est = |e: Estimator, a: &ExpArgs, o: &mut dyn Write, er: &mut dyn Write| {
        experiment(e, a, started, o, er).map(|r| (r.passed, a.check))
    };
    match cli.command {
        Command::Sample(a) => sample(&a, stdout).map(|_| (true, false)),
        Command::MeanT(a) => est(Estimator::MeanT, &a, stdout, stderr),
        Command::PmfTv(a) => est(Estimator::CountPmfTv, &a, stdout, stderr),
        Command::RareEvent(a) => est(Estimator::RareEvent, &a, stdout, stderr),
        Command::RateCurve(a) => est(Estimator::RateCurve, &a, stdout, stderr),
        Command::Intensity(a) => est(Estimator::Intensity, &a, stdout, stderr),
        Command::Blocking(a) => est(Estimator::Blocking, &a, stdout, stderr),
        Command::M0(a) => est(Estimator::M0Functional, &a, stdout, stderr),
        Command::Coupling(a) => est(Estimator::Coupling, &a, stdout, stderr),
        Command::RateFunction(a) => rate_function(&a, stdout).map(|_| (true, false)),
        Command::Regime(a) => {
            let cfg = a.to_config()?;
            let report = crate::experiments::regime_report(&cfg)?;
            let json = to_json_sig17(&report);
            match &a.out {
                Some(dir) => {
                    let csv = regime_csv(&report);
                    write_outputs(dir, &json, &csv, &meta("regime", started))?;
                }
                None => stdout.write_all(json.as_bytes())?,
            }
            Ok((true, false))
        }
        Command::Suite(a) => {
            let reports = run_suite(a.quick, a.seed, a.threads)?;
            for (entry, r) in suite_plan(a.quick, a.seed).iter().zip(&reports) {
                writeln!(stderr, "{:<24} {}", entry.label, if r.pass { "PASS" } else { "FAIL" })?;
            }
            let name = if a.quick { "suite --quick" } else { "suite" };
            emit_reports(name, &reports, a.out.as_deref(), started, stdout).map(|o| (o.passed, a.check))
        }
    }
}

fn regime_csv(r: &crate::analytic::RegimeReport) -> String {
    let mut s = String::from("n,a_n,diagnostic\n");
    for ((n, a), g) in r.n.iter().zip(&r.a_n).zip(&r.diagnostic) {
        s.push_str(&format!("{},{},{}\n", fmt_sig17(*n), fmt_sig17(*a), fmt_sig17(*g)));
    }
    s
}

/// Runs the CLI on `args` (program name first) and returns the exit code.
pub fn run_cli<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(stderr, "{}", e.render());
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match dispatch(cli, stdout, stderr) {
        Ok((true, _)) | Ok((false, false)) => 0,
        Ok((false, true)) => {
            let _ = writeln!(stderr, "check failed: at least one report did not pass");
            2
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run_cli(
            std::iter::once("knnball-lab").chain(args.iter().copied()),
            &mut out,
            &mut err,
        );
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn rate_function_at_alpha_is_zero() {
        let (code, out, _) = call(&["rate-function", "--k", "1", "--s0", "0", "--x", "1.0"]);
        assert_eq!((code, out.trim()), (0, "0"));
    }

    #[test]
    fn unknown_subcommand_prints_usage() {
        let (code, _, err) = call(&["bogus"]);
        assert_eq!(code, 1);
        assert!(err.contains("Usage"), "{err}");
        assert_eq!(call(&["--help"]).0, 0);
    }

    #[test]
    fn config_errors_exit_with_one() {
        assert_eq!(call(&["mean-t", "--reps", "0"]).0, 1);
        assert_eq!(call(&["mean-t", "--n-ladder", "10,5"]).0, 1);
        assert_eq!(call(&["mean-t", "--a-rule", "sideways", "--a-param", "1"]).0, 1);
        assert_eq!(call(&["mean-t", "--config", "/nonexistent/x.toml"]).0, 1);
    }

    #[test]
    fn mean_t_report_to_stdout() {
        let (code, out, _) = call(&["mean-t", "--n", "1000", "--k", "1", "--a", "5", "--reps", "200", "--seed", "7"]);
        assert_eq!(code, 0);
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        let p = &v["points"][0];
        assert!((p["reference"].as_f64().unwrap() - 6.737_947).abs() < 1e-6);
        assert!(p["pass"].is_boolean());
    }

    #[test]
    fn config_file_and_flag_override() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("exp.toml");
        fs::write(
            &cfg,
            "dim = 1\nk = 2\nn_ladder = [300.0, 600.0]\na_rule = \"fraction\"\na_param = [0.5]\nreps = 20\n",
        )
        .unwrap();
        let out = dir.path().join("out");
        let (code, _, err) = call(&[
            "mean-t",
            "--config",
            cfg.to_str().unwrap(),
            "--reps",
            "30",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code, 0, "{err}");
        let json: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
        assert_eq!(json["config"]["reps"], 30);
        assert_eq!(json["config"]["k"], 2);
        assert_eq!(json["points"].as_array().unwrap().len(), 2);
        assert!(out.join("report.csv").exists() && out.join("meta.json").exists());

        fs::write(&cfg, "bogus_key = 1\n").unwrap();
        assert_eq!(call(&["mean-t", "--config", cfg.to_str().unwrap()]).0, 1);
    }

    #[test]
    fn check_flag_turns_failures_into_exit_two() {
        // 40 points with 10 replications cannot put the Poisson count law
        // within 0.05 total variation
        let args = ["pmf-tv", "--n-ladder", "20,40", "--a-rule", "fraction", "--a-param", "0.6", "--reps", "10"];
        assert_eq!(call(&args).0, 0);
        let mut with_check = args.to_vec();
        with_check.push("--check");
        assert_eq!(call(&with_check).0, 2);
    }

    #[test]
    fn sample_writes_csv() {
        let (code, out, _) = call(&["sample", "--kind", "binomial", "--n", "5", "--dim", "3"]);
        assert_eq!(code, 0);
        assert!(out.starts_with("x_1,x_2,x_3\n"));
        assert_eq!(out.lines().count(), 6);
        let (code, out, _) = call(&["sample", "--kind", "marked", "--n", "50", "--dim", "1", "--a", "-2"]);
        assert_eq!(code, 0);
        assert!(out.starts_with("x_1,mark\n"));
    }

    #[test]
    fn regime_subcommand() {
        let (code, out, _) = call(&["regime", "--n-ladder", "1000,10000,100000", "--a-rule", "power", "--a-param", "2"]);
        assert_eq!(code, 0);
        assert!(out.contains("\"regime\": \"m0\""), "{out}");
    }
}
