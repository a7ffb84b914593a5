//! Command-line front end.
//!
//! Exit codes: 0 success, 1 violation / not found / not SPD, 2 usage or IO
//! error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::block::{identity_residuals, schur_complement, BlockPartition, TwoBlock};
use crate::brownian::{covariance_from_path, sample_path, superadditivity_gap, GaussianConvention, GridSpec};
use crate::dense::{cholesky, SymMatrix};
use crate::error::Error;
use crate::inequalities::{GapReport, Variant, Verdict, DEFAULT_REL_TOL};
use crate::randgen::{search_counterexample, GenConfig};
use crate::report::{BrownianSummary, Counts, InstanceDump, MatrixFile, RunReport, SuiteSummary, Violation};
use crate::suites::{verify, Suite};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Absolute agreement required between the Brownian gap and its
/// determinant-form cross-check.
pub const BROWNIAN_CROSS_CHECK_TOL: f64 = 1e-10;

#[derive(Debug, Parser)]
#[command(name = "detperturb", version, about = "Verify determinantal perturbation inequalities for SPD matrices")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run randomized verification suites.
    Verify(VerifyArgs),
    /// Search for violations of the full-D generalizations.
    Counterexample(CounterexampleArgs),
    /// Per-path super-additivity of the discretized Brownian functional.
    Brownian(BrownianArgs),
    /// Print the two-block decomposition of a matrix file.
    Schur(SchurArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 32)]
    pub max_dim: usize,
    #[arg(long, default_value_t = 5)]
    pub max_blocks: usize,
}

impl GenArgs {
    fn config(&self) -> Result<GenConfig, Error> {
        let cfg = GenConfig { seed: self.seed, max_dim: self.max_dim, max_blocks: self.max_blocks, ..GenConfig::default() };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SuiteArg {
    Theorem1,
    Theorem2,
    Lemma,
    Grothendieck,
    Weyl,
    Fischer,
    Identities,
    All,
}

impl SuiteArg {
    fn suites(self) -> Vec<Suite> {
        match self {
            SuiteArg::Theorem1 => vec![Suite::Theorem1],
            SuiteArg::Theorem2 => vec![Suite::Theorem2],
            SuiteArg::Lemma => vec![Suite::Lemma],
            SuiteArg::Grothendieck => vec![Suite::Grothendieck],
            SuiteArg::Weyl => vec![Suite::Weyl],
            SuiteArg::Fischer => vec![Suite::Fischer],
            SuiteArg::Identities => vec![Suite::Identities],
            SuiteArg::All => Suite::ALL.to_vec(),
        }
    }

    fn label(self) -> &'static str {
        match self {
            SuiteArg::All => "all",
            other => other.suites()[0].name(),
        }
    }
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, value_enum, default_value_t = SuiteArg::All)]
    pub suite: SuiteArg,
    #[arg(long, default_value_t = 1000)]
    pub trials: u64,
    #[command(flatten)]
    pub gen: GenArgs,
    /// Relative tolerance for inequality gaps.
    #[arg(long, default_value_t = DEFAULT_REL_TOL)]
    pub tol: f64,
    /// Write the JSON report here.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TargetArg {
    #[value(name = "theorem1-general")]
    Theorem1General,
    #[value(name = "theorem2-general")]
    Theorem2General,
}

impl TargetArg {
    fn variant(self) -> Variant {
        match self {
            TargetArg::Theorem1General => Variant::Theorem1,
            TargetArg::Theorem2General => Variant::Theorem2,
        }
    }

    fn name(self) -> &'static str {
        match self {
            TargetArg::Theorem1General => "theorem1-general",
            TargetArg::Theorem2General => "theorem2-general",
        }
    }
}

#[derive(Debug, Args)]
pub struct CounterexampleArgs {
    #[arg(long, value_enum)]
    pub target: TargetArg,
    #[arg(long, default_value_t = 100_000)]
    pub max_trials: u64,
    /// Skip the built-in instance and search randomly only.
    #[arg(long)]
    pub no_seeds: bool,
    #[command(flatten)]
    pub gen: GenArgs,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BrownianArgs {
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub t1: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub t2: f64,
    #[arg(long, default_value_t = 16)]
    pub n: usize,
    #[arg(long, default_value_t = 16)]
    pub m: usize,
    #[arg(long, default_value_t = 100)]
    pub paths: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Multiplier on the segment lengths inside the exponent.
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub lambda_scale: f64,
    #[arg(long, default_value_t = DEFAULT_REL_TOL)]
    pub tol: f64,
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Write per-path rows (path, f_full, f_1, f_2, gap) as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SchurArgs {
    /// Matrix JSON file: {"n": int, "data": [...], "partition": [...]?}.
    #[arg(long)]
    pub input: PathBuf,
    /// Size of the leading block; defaults to the file's first partition block.
    #[arg(long)]
    pub split: Option<usize>,
}

/// Parses `args` (including the program name) and runs the command,
/// writing human-readable output to `out`. Returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Verify(a) => run_verify(&a, out),
        Command::Counterexample(a) => run_counterexample(&a, out),
        Command::Brownian(a) => run_brownian(&a, out),
        Command::Schur(a) => schur_inspect(&a, out),
    };
    match result {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
    }
}

type CmdResult = Result<i32, String>;

fn usage(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn write_report(path: &Option<PathBuf>, json: &str) -> Result<(), String> {
    if let Some(p) = path {
        std::fs::write(p, json).map_err(|e| format!("cannot write {}: {e}", p.display()))?;
    }
    Ok(())
}

pub fn run_verify(args: &VerifyArgs, out: &mut dyn Write) -> CmdResult {
    let cfg = args.gen.config().map_err(usage)?;
    if args.tol.is_nan() || args.tol < 0.0 {
        return Err(format!("--tol must be non-negative, got {}", args.tol));
    }
    let start = Instant::now();
    let (mut report, _) =
        verify(&args.suite.suites(), args.suite.label(), &cfg, args.trials, args.tol).map_err(usage)?;
    report.wall_clock_secs = start.elapsed().as_secs_f64();

    for s in &report.suites {
        writeln!(
            out,
            "{:<13} trials={} holds={} violated={} skipped={}",
            s.suite, s.trials, s.counts.holds, s.counts.violated, s.counts.skipped
        )
        .map_err(usage)?;
    }
    for v in report.violations.iter().filter(|v| v.report.verdict == Verdict::Violated).take(10) {
        writeln!(
            out,
            "VIOLATION {} trial {}: {} gap={:.6e} tol={:.3e}",
            v.suite, v.trial, v.report.name, v.report.gap, v.report.tol
        )
        .map_err(usage)?;
    }
    writeln!(out, "total violations: {}", report.counts.violated).map_err(usage)?;
    write_report(&args.report, &report.to_json())?;
    Ok(if report.counts.violated == 0 { EXIT_OK } else { EXIT_FAIL })
}

fn fmt_matrix(m: &SymMatrix) -> String {
    let rows: Vec<String> = m
        .to_rows()
        .iter()
        .map(|r| format!("[{}]", r.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(", ")))
        .collect();
    format!("[{}]", rows.join(", "))
}

#[derive(Serialize)]
struct CounterexampleReport<'a> {
    target: &'a str,
    seed: u64,
    seeds_enabled: bool,
    found: bool,
    trials_used: u64,
    gap: f64,
    c: Option<MatrixFile>,
    d: Option<MatrixFile>,
    report: Option<&'a GapReport>,
}

pub fn run_counterexample(args: &CounterexampleArgs, out: &mut dyn Write) -> CmdResult {
    let cfg = args.gen.config().map_err(usage)?;
    if args.max_trials == 0 {
        return Err("--max-trials must be at least 1".into());
    }
    let res = search_counterexample(args.target.variant(), &cfg, args.max_trials, !args.no_seeds).map_err(usage)?;
    let (c, d) = match &res.instance {
        Some((c, d, p)) => (Some(MatrixFile::from_matrix(c, Some(p))), Some(MatrixFile::from_matrix(d, Some(p)))),
        None => (None, None),
    };
    if res.found {
        let (cm, dm, p) = res.instance.as_ref().expect("found implies an instance");
        writeln!(out, "{}: violation found after {} trial(s)", args.target.name(), res.trials_used).map_err(usage)?;
        writeln!(out, "C = {}", fmt_matrix(cm)).map_err(usage)?;
        writeln!(out, "D = {}", fmt_matrix(dm)).map_err(usage)?;
        writeln!(out, "partition = {:?}", p.sizes()).map_err(usage)?;
        if let Some(r) = &res.report {
            writeln!(out, "lhs_log = {:.12} rhs_log = {:.12}", r.lhs_log, r.rhs_log).map_err(usage)?;
        }
        writeln!(out, "gap = {:.12}", res.gap).map_err(usage)?;
    } else {
        writeln!(out, "{}: no violation in {} trial(s)", args.target.name(), res.trials_used).map_err(usage)?;
    }
    let json = CounterexampleReport {
        target: args.target.name(),
        seed: cfg.seed,
        seeds_enabled: !args.no_seeds,
        found: res.found,
        trials_used: res.trials_used,
        gap: res.gap,
        c,
        d,
        report: res.report.as_ref(),
    };
    write_report(&args.report, &serde_json::to_string_pretty(&json).map_err(usage)?)?;
    Ok(if res.found { EXIT_OK } else { EXIT_FAIL })
}

#[derive(Serialize)]
struct CsvRow {
    path: u64,
    f_full: f64,
    f_1: f64,
    f_2: f64,
    gap: f64,
}

pub fn run_brownian(args: &BrownianArgs, out: &mut dyn Write) -> CmdResult {
    let grid = GridSpec::new(args.t1, args.t2, args.n, args.m)
        .and_then(|g| g.with_lambda_scale(args.lambda_scale))
        .map_err(usage)?;
    if args.paths == 0 {
        return Err("--paths must be at least 1".into());
    }
    if args.tol.is_nan() || args.tol < 0.0 {
        return Err(format!("--tol must be non-negative, got {}", args.tol));
    }
    let start = Instant::now();
    let mut counts = Counts::default();
    let mut violations = Vec::new();
    let mut rows = Vec::with_capacity(args.paths as usize);
    let (mut sum_full, mut sum_1, mut sum_2, mut min_gap) = (0.0, 0.0, 0.0, f64::INFINITY);
    for p in 0..args.paths {
        let path = sample_path(&grid, args.seed, p).map_err(usage)?;
        let r = superadditivity_gap(&path, GaussianConvention::Standard).map_err(usage)?;
        let mut gap = GapReport::new("superadditivity", r.f_full, r.f_1 + r.f_2, r.gap)
            .rejudge(args.tol)
            .with_fingerprint(r.fingerprint);
        gap.alt_gap = Some(r.cross_check);
        if (r.gap - r.cross_check).abs() > BROWNIAN_CROSS_CHECK_TOL {
            gap.verdict = Verdict::Violated;
        }
        counts.record(gap.verdict);
        if gap.verdict != Verdict::Holds {
            let (c, part) = covariance_from_path(&path).map_err(usage)?;
            violations.push(Violation {
                suite: "brownian".into(),
                trial: p,
                report: gap,
                instance: InstanceDump::new(Some(&part)).with("C", c.matrix()),
            });
        }
        sum_full += r.f_full;
        sum_1 += r.f_1;
        sum_2 += r.f_2;
        min_gap = min_gap.min(r.gap);
        rows.push(CsvRow { path: p, f_full: r.f_full, f_1: r.f_1, f_2: r.f_2, gap: r.gap });
    }
    let k = args.paths as f64;
    let report = RunReport {
        suite: "brownian".into(),
        seed: args.seed,
        trials: args.paths,
        tol: args.tol,
        max_dim: args.n + args.m,
        max_blocks: 2,
        counts,
        suites: vec![SuiteSummary { suite: "brownian".into(), trials: args.paths, counts }],
        violations,
        brownian: Some(BrownianSummary {
            grid,
            mean_f_full: sum_full / k,
            mean_f_1: sum_1 / k,
            mean_f_2: sum_2 / k,
            min_gap,
        }),
        wall_clock_secs: start.elapsed().as_secs_f64(),
    };
    writeln!(
        out,
        "brownian paths={} n={} m={} holds={} violated={}",
        args.paths, args.n, args.m, counts.holds, counts.violated
    )
    .map_err(usage)?;
    writeln!(
        out,
        "mean f_full={:.6} f_1={:.6} f_2={:.6} min gap={:.6e}",
        sum_full / k,
        sum_1 / k,
        sum_2 / k,
        min_gap
    )
    .map_err(usage)?;
    write_report(&args.report, &report.to_json())?;
    if let Some(path) = &args.csv {
        write_csv(path, &rows).map_err(|e| format!("cannot write {}: {e}", path.display()))?;
    }
    Ok(if counts.violated == 0 { EXIT_OK } else { EXIT_FAIL })
}

fn write_csv(path: &Path, rows: &[CsvRow]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn schur_inspect(args: &SchurArgs, out: &mut dyn Write) -> CmdResult {
    let file = MatrixFile::load(&args.input).map_err(usage)?;
    let m = file.matrix().map_err(usage)?;
    let split = match (args.split, file.block_partition().map_err(usage)?) {
        (Some(s), _) => s,
        (None, Some(p)) => p.size(0),
        (None, None) => return Err("--split is required when the file has no partition".into()),
    };
    BlockPartition::split(m.n(), split).map_err(usage)?;
    let spd = match cholesky(&m) {
        Ok(s) => s,
        Err(e) => {
            writeln!(out, "matrix is not positive definite: {e}").map_err(usage)?;
            return Ok(EXIT_FAIL);
        }
    };
    let parts = TwoBlock::of(&m, split).map_err(usage)?;
    let s_a = schur_complement(&spd, split).map_err(usage)?;
    let ld_a = cholesky(&parts.a).map_err(usage)?.log_det();
    let ld_d = cholesky(&parts.d).map_err(usage)?.log_det();
    let ld_s = cholesky(&s_a).map_err(usage)?.log_det();
    let res = identity_residuals(&spd, split, None).map_err(usage)?;

    let mut w = |line: String| writeln!(out, "{line}").map_err(usage);
    w(format!("split = {split} (n = {})", m.n()))?;
    w(format!("A = {}", fmt_matrix(&parts.a)))?;
    w(format!("D = {}", fmt_matrix(&parts.d)))?;
    w(format!("S_A = {}", fmt_matrix(&s_a)))?;
    w(format!("logdet M = {:.12}", spd.log_det()))?;
    w(format!("logdet A = {ld_a:.12}"))?;
    w(format!("logdet D = {ld_d:.12}"))?;
    w(format!("logdet S_A = {ld_s:.12}"))?;
    w(format!("fischer residual = {:.3e}", res.fischer))?;
    match res.woodbury {
        Some(r) => w(format!("woodbury residual = {r:.3e}"))?,
        None => w("woodbury residual = skipped".into())?,
    }
    w(format!("sylvester residual = {:.3e}", res.sylvester))?;
    w(format!("fischer slack logdet(D) - logdet(S_A) = {:.12}", ld_d - ld_s))?;
    Ok(EXIT_OK)
}
