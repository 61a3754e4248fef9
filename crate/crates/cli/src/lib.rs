//! `stlap`: evaluate the Stiefel Laplace–Beltrami operator at points, run the
//! seeded verification suites and the diffusion generator check, and emit
//! JSON reports.
//!
//! Exit codes: 0 all checks pass, 1 a check failed, 2 input error,
//! 3 numerical degeneracy.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use stiefel_laplace::ambient::{parse_matrix, random_stiefel_with};
use stiefel_laplace::diffusion::{walker_rng, WalkConfig};
use stiefel_laplace::functions::{BuiltinSpec, ExpressionField, FieldRef, ScalarField};
use stiefel_laplace::laplace::{
    laplace_closed, laplace_frame_oracle, rel_err, special_orthogonal_laplacian, sphere_laplacian,
};
use stiefel_laplace::verify::{diffusion_check, run_suite, CaseInputs, Suite, SuiteConfig};
use stiefel_laplace::{Error, StiefelPoint};

pub mod report;

pub use report::{Discrepancy, Report, ReportCase, Summary, SCHEMA_VERSION};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_DEGENERATE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "stlap", version, about = "Laplace-Beltrami operator on the Stiefel manifold")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate the operator at points.
    Eval(EvalArgs),
    /// Run seeded verification suites.
    Verify(VerifyArgs),
    /// Compare a random-walk generator estimate with ½·Δ_St f.
    Diffuse(DiffuseArgs),
}

#[derive(Debug, Clone, Args)]
pub struct FieldArgs {
    /// Expression in u[i,j] (1-based).
    #[arg(long, conflicts_with = "field_file", required_unless_present = "field_file")]
    pub expr: Option<String>,
    /// JSON file describing a built-in field (linear, brockett, procrustes).
    #[arg(long)]
    pub field_file: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct PointArgs {
    /// Matrix file ("n p" header, then n rows); repeatable.
    #[arg(long, conflicts_with = "random_points", required_unless_present = "random_points")]
    pub point_file: Vec<PathBuf>,
    /// Number of seeded random points.
    #[arg(long)]
    pub random_points: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Override a tolerance or setting, KEY=VALUE; repeatable.
    #[arg(long, value_name = "KEY=VAL")]
    pub tol_override: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Closed,
    Frame,
    Sphere,
    Son,
    All,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub p: Option<usize>,
    #[command(flatten)]
    pub field: FieldArgs,
    #[command(flatten)]
    pub points: PointArgs,
    /// Methods to run; comma-separated or repeated.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "closed")]
    pub method: Vec<MethodArg>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    /// Suite name or `all`; comma-separated or repeated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub suite: Vec<String>,
    /// Cases per suite (suite default when omitted).
    #[arg(long)]
    pub cases: Option<usize>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args)]
pub struct DiffuseArgs {
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub p: Option<usize>,
    #[command(flatten)]
    pub field: FieldArgs,
    #[command(flatten)]
    pub points: PointArgs,
    /// Step size h.
    #[arg(long)]
    pub step: Option<f64>,
    /// Walkers per point, M.
    #[arg(long)]
    pub samples: Option<usize>,
    #[command(flatten)]
    pub common: CommonArgs,
}

/// Failure before a report could be produced.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn input(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }

    fn context(e: Error, what: &str) -> Self {
        let code = if e.is_input_error() {
            EXIT_INPUT
        } else {
            EXIT_DEGENERATE
        };
        Self {
            code,
            message: format!("{what}: {e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = if e.is_input_error() {
            EXIT_INPUT
        } else {
            EXIT_DEGENERATE
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

/// Exit code for a finished report.
pub fn exit_code(report: &Report) -> i32 {
    if report.has_degeneracy() {
        EXIT_DEGENERATE
    } else if report.summary.failed > 0 {
        EXIT_CHECK_FAILED
    } else {
        EXIT_PASS
    }
}

pub fn run(cli: &Cli) -> Result<Report, CliError> {
    let start = Instant::now();
    let mut report = match &cli.command {
        Command::Eval(a) => cmd_eval(a)?,
        Command::Verify(a) => cmd_verify(a)?,
        Command::Diffuse(a) => cmd_diffuse(a)?,
    };
    report.timings.total_seconds = start.elapsed().as_secs_f64();
    Ok(report)
}

/// Runs the command, writes the report and returns the process exit code.
pub fn run_and_write(cli: &Cli) -> i32 {
    let report = match run(cli) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return e.code;
        }
    };
    let json = report.to_json();
    let common = match &cli.command {
        Command::Eval(a) => &a.common,
        Command::Verify(a) => &a.common,
        Command::Diffuse(a) => &a.common,
    };
    match &common.out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, json + "\n") {
                eprintln!("error: cannot write {}: {e}", path.display());
                return EXIT_INPUT;
            }
            let s = &report.summary;
            println!(
                "{}: {} passed, {} failed, {} skipped",
                report.command, s.passed, s.failed, s.skipped
            );
        }
        None => println!("{json}"),
    }
    exit_code(&report)
}

fn suite_config(overrides: &[String]) -> Result<SuiteConfig, CliError> {
    let mut cfg = SuiteConfig::default();
    for item in overrides {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| CliError::input(format!("--tol-override expects KEY=VAL, got {item:?}")))?;
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| CliError::input(format!("--tol-override {key}: {value:?} is not a number")))?;
        cfg.set(key.trim(), value)?;
    }
    Ok(cfg)
}

struct Problem {
    field: FieldRef,
    points: Vec<(String, StiefelPoint)>,
    n: usize,
    p: usize,
}

fn agree(what: &str, a: Option<(usize, usize)>, b: (usize, usize)) -> Result<(usize, usize), CliError> {
    match a {
        Some(a) if a != b => Err(CliError::input(format!(
            "shape mismatch: expected {}x{}, {what} is {}x{}",
            a.0, a.1, b.0, b.1
        ))),
        _ => Ok(b),
    }
}

fn load_problem(
    n: Option<usize>,
    p: Option<usize>,
    field: &FieldArgs,
    points: &PointArgs,
    seed: u64,
) -> Result<Problem, CliError> {
    let mut shape = match (n, p) {
        (Some(n), Some(p)) => Some((n, p)),
        (None, None) => None,
        _ => return Err(CliError::input("--n and --p must be given together")),
    };

    let builtin: Option<FieldRef> = match &field.field_file {
        Some(path) => {
            let text = read(path)?;
            let spec: BuiltinSpec =
                serde_json::from_str(&text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
            let f = spec
                .build()
                .map_err(|e| CliError::context(e, &path.display().to_string()))?;
            shape = Some(agree("the field", shape, f.shape())?);
            Some(Arc::new(f))
        }
        None => None,
    };

    let mut loaded = Vec::new();
    for path in &points.point_file {
        let name = path.display().to_string();
        let m = parse_matrix(&read(path)?).map_err(|e| CliError::context(e, &name))?;
        shape = Some(agree(&name, shape, m.shape())?);
        let u = StiefelPoint::new(m).map_err(|e| CliError::context(e, &name))?;
        loaded.push((name, u));
    }

    let (n, p) = shape.ok_or_else(|| CliError::input("cannot infer the shape; pass --n and --p"))?;
    if n == 0 || p == 0 || p > n {
        return Err(CliError::input(format!("need 1 <= p <= n, got n={n}, p={p}")));
    }
    if let Some(k) = points.random_points {
        for i in 0..k {
            // High streams, so points never share a stream with diffusion walkers.
            let mut rng = walker_rng(seed, (1 << 63) | i as u64);
            loaded.push((format!("random-{i}"), random_stiefel_with(n, p, &mut rng)?));
        }
    }
    if loaded.is_empty() {
        return Err(CliError::input("no points to evaluate"));
    }

    let field = match builtin {
        Some(f) => f,
        None => {
            let src = field.expr.as_deref().unwrap_or_default();
            Arc::new(ExpressionField::parse(src, n, p).map_err(|e| CliError::context(e, "--expr"))?)
        }
    };
    Ok(Problem {
        field,
        points: loaded,
        n,
        p,
    })
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))
}

const EVAL_ORDER: [MethodArg; 4] = [MethodArg::Closed, MethodArg::Frame, MethodArg::Sphere, MethodArg::Son];

fn method_name(m: MethodArg) -> &'static str {
    match m {
        MethodArg::Closed => "closed",
        MethodArg::Frame => "frame",
        MethodArg::Sphere => "sphere",
        MethodArg::Son => "son",
        MethodArg::All => "all",
    }
}

pub fn cmd_eval(a: &EvalArgs) -> Result<Report, CliError> {
    let cfg = suite_config(&a.common.tol_override)?;
    let prob = load_problem(a.n, a.p, &a.field, &a.points, a.common.seed)?;
    let all = a.method.contains(&MethodArg::All);
    let methods: Vec<MethodArg> = EVAL_ORDER.into_iter().filter(|m| all || a.method.contains(m)).collect();
    if !all {
        if methods.contains(&MethodArg::Sphere) && prob.p != 1 {
            return Err(CliError::input(format!(
                "--method sphere needs p = 1, got p = {}",
                prob.p
            )));
        }
        if methods.contains(&MethodArg::Son) && prob.p != prob.n {
            return Err(CliError::input(format!(
                "--method son needs p = n, got {}x{}",
                prob.n, prob.p
            )));
        }
    }

    let f = &*prob.field;
    let per_point = prob
        .points
        .par_iter()
        .map(|(name, u)| -> Result<_, CliError> {
            let inputs = CaseInputs {
                n: prob.n,
                p: prob.p,
                field: Some(f.describe()),
                detail: Some(name.clone()),
            };
            let mut cases = Vec::new();
            let mut values = Vec::new();
            let mut timings = Vec::new();
            for &m in &methods {
                let id = format!("{name}/{}", method_name(m));
                let t0 = Instant::now();
                let applicable = match m {
                    MethodArg::Sphere => prob.p == 1,
                    MethodArg::Son => prob.p == prob.n,
                    _ => true,
                };
                if !applicable {
                    cases.push(ReportCase::skipped(
                        id,
                        inputs.clone(),
                        method_name(m),
                        format!("not applicable to {}x{}", prob.n, prob.p),
                    ));
                    continue;
                }
                let (value, diag) = match m {
                    MethodArg::Closed => {
                        let r = laplace_closed(f, u).map_err(|e| CliError::context(e, &id))?;
                        (r.value, Some((&r.diagnostics).into()))
                    }
                    MethodArg::Frame => {
                        let r = laplace_frame_oracle(f, u).map_err(|e| CliError::context(e, &id))?;
                        (r.value, Some((&r.diagnostics).into()))
                    }
                    MethodArg::Sphere => (
                        sphere_laplacian(f, u.as_matrix()).map_err(|e| CliError::context(e, &id))?,
                        None,
                    ),
                    _ => (
                        special_orthogonal_laplacian(f, u).map_err(|e| CliError::context(e, &id))?,
                        None,
                    ),
                };
                timings.push((id.clone(), t0.elapsed().as_secs_f64()));
                let mut case = ReportCase::evaluation(id, inputs.clone(), method_name(m), value);
                case.diagnostics = diag;
                cases.push(case);
                values.push((m, value));
            }
            let mut disc = Vec::new();
            for (i, &(ma, va)) in values.iter().enumerate() {
                for &(mb, vb) in &values[i + 1..] {
                    let tol = if ma == MethodArg::Frame || mb == MethodArg::Frame {
                        cfg.closed_vs_frame
                    } else {
                        cfg.reductions
                    };
                    let rel = rel_err(vb, va);
                    disc.push(Discrepancy {
                        point: name.clone(),
                        methods: [method_name(ma).into(), method_name(mb).into()],
                        abs_err: (va - vb).abs(),
                        rel_err: rel,
                        tolerance: tol,
                        pass: rel <= tol,
                    });
                }
            }
            Ok((cases, disc, timings))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut cases = Vec::new();
    let mut discrepancies = Vec::new();
    let mut timings = Vec::new();
    for (c, d, t) in per_point {
        cases.extend(c);
        discrepancies.extend(d);
        timings.extend(t);
    }
    let mut report = Report::new("eval", Some(a.common.seed), cases, discrepancies);
    report.timings.cases = timings.into_iter().collect();
    Ok(report)
}

pub fn cmd_verify(a: &VerifyArgs) -> Result<Report, CliError> {
    let cfg = suite_config(&a.common.tol_override)?;
    let mut suites = Vec::new();
    for name in &a.suite {
        if name == "all" {
            suites.extend(Suite::ALL);
        } else {
            suites.push(name.parse::<Suite>()?);
        }
    }
    let mut cases = Vec::new();
    let mut timings = Vec::new();
    for s in suites {
        let t0 = Instant::now();
        let n = a.cases.unwrap_or_else(|| s.default_cases());
        cases.extend(run_suite(s, n, a.common.seed, &cfg).into_iter().map(ReportCase::from));
        timings.push((s.name().to_string(), t0.elapsed().as_secs_f64()));
    }
    let mut report = Report::new("verify", Some(a.common.seed), cases, Vec::new());
    report.timings.cases = timings.into_iter().collect();
    Ok(report)
}

pub fn cmd_diffuse(a: &DiffuseArgs) -> Result<Report, CliError> {
    let mut cfg = suite_config(&a.common.tol_override)?;
    if let Some(h) = a.step {
        cfg.set("diffusion_h", h)?;
    }
    if let Some(m) = a.samples {
        if m == 0 {
            return Err(CliError::input("--samples must be at least 1"));
        }
        cfg.diffusion_samples = m;
    }
    let prob = load_problem(a.n, a.p, &a.field, &a.points, a.common.seed)?;
    let mut cases = Vec::new();
    for (k, (name, u)) in prob.points.iter().enumerate() {
        let walk = WalkConfig::new(
            cfg.diffusion_h,
            cfg.diffusion_samples,
            a.common.seed.wrapping_add(k as u64),
        )?;
        let r = diffusion_check(format!("{name}/generator"), &*prob.field, u, &walk, &cfg)
            .map_err(|e| CliError::context(e, name))?;
        let mut case = ReportCase::from(r);
        if case.std_error.is_none() {
            case.pass = None;
            case.note = Some("standard error undefined for a single sample; no pass claim".into());
        }
        cases.push(case);
    }
    Ok(Report::new("diffuse", Some(a.common.seed), cases, Vec::new()))
}
