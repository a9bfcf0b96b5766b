//! Command-line batch harness.
//!
//! Every subcommand writes CSV or JSON to `--out` or stdout. A
//! `--config FILE` of `key = value` lines supplies any long flag; flags given
//! on the command line win. `GADI_THREADS` caps the number of concurrently
//! running table cells.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::{default_constants, predict, BoundConstants, BoundReport};
use crate::error::{GadiError, Result};
use crate::gadi::{default_xi, GadiConfig, SolveReport, SolveStatus};
use crate::gpr::{convdiff_training_set, retrain_extend, AlphaSearch, GprModel, TrainingSet};
use crate::inner_solver::InnerMethod;
use crate::precision::FloatFormat;
use crate::problems::ProblemSpec;

/// Exit code for a solve that ran but did not converge.
pub const EXIT_NOT_CONVERGED: i32 = 2;
/// Exit code for bad arguments and other failures.
pub const EXIT_USAGE: i32 = 1;

#[derive(Debug, Parser)]
#[command(name = "gadi", version, about = "Mixed-precision GADI solver and experiment harness")]
#[command(args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one solve and print its report as JSON.
    Solve(SolveArgs),
    /// Run a grid of precision triples and shifts and print CSV.
    Table(TableArgs),
    /// Generate training sets, fit and predict shifts.
    Gpr(GprArgs),
    /// Evaluate the a-priori error bounds next to a measured solve.
    Bounds(BoundsArgs),
    /// Residual histories over a range of shifts, one row per step.
    Sweep(SweepArgs),
}

/// A precision triple `u_r,u,u_f`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Triple {
    pub u_r: FloatFormat,
    pub u: FloatFormat,
    pub u_f: FloatFormat,
}

impl std::str::FromStr for Triple {
    type Err = GadiError;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        let [u_r, u, u_f] = parts[..] else {
            return Err(GadiError::Parse(format!("precision triple needs three names, got `{s}`")));
        };
        Ok(Triple { u_r: u_r.parse()?, u: u.parse()?, u_f: u_f.parse()? })
    }
}

impl std::fmt::Display for Triple {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{},{},{}", self.u_r, self.u, self.u_f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StartVector {
    Zero,
    Ones,
    Random,
}

/// Solver settings shared by every subcommand that runs solves.
#[derive(Debug, Clone, Args)]
pub struct SolverOptions {
    #[arg(long, default_value_t = 1.0)]
    pub omega: f64,
    /// Squared relative residual tolerance; defaults by working precision.
    #[arg(long)]
    pub xi: Option<f64>,
    /// Relative tolerance of Krylov inner solves.
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long, default_value = "lu", value_parser = parse_from_str::<InnerMethod>)]
    pub inner: InnerMethod,
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Scale residuals by powers of two before rounding them to `u_r`.
    #[arg(long)]
    pub residual_scaling: bool,
    #[arg(long, value_enum, default_value_t = StartVector::Zero)]
    pub x0: StartVector,
    /// Seed for the random start vector.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl SolverOptions {
    pub fn config(&self, alpha: f64, t: Triple) -> GadiConfig {
        let mut cfg = GadiConfig::new(alpha, t.u_r, t.u, t.u_f);
        cfg.omega = self.omega;
        cfg.xi = self.xi.unwrap_or_else(|| default_xi(t.u));
        cfg.inner.method = self.inner;
        if let Some(eps) = self.epsilon {
            cfg.inner.tol_epsilon = eps;
        }
        if let Some(m) = self.max_iters {
            cfg.max_outer_iters = m;
        }
        cfg.residual_scaling = self.residual_scaling;
        cfg
    }

    pub fn start(&self, n: usize) -> Vec<f64> {
        match self.x0 {
            StartVector::Zero => vec![0.0; n],
            StartVector::Ones => vec![1.0; n],
            StartVector::Random => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
            }
        }
    }
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Problem, e.g. `convdiff3d:n=16` or `sylvester:n=64,r=0.1`.
    #[arg(value_parser = parse_from_str::<ProblemSpec>)]
    pub problem: ProblemSpec,
    #[arg(long, default_value = "double,double,double", value_parser = parse_from_str::<Triple>)]
    pub prec: Triple,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Training-set CSV; the shift is predicted from it when `--alpha` is absent.
    #[arg(long)]
    pub gpr: Option<PathBuf>,
    /// Include the solution vector in the report.
    #[arg(long)]
    pub print_solution: bool,
    #[command(flatten)]
    pub solver: SolverOptions,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Preset {
    /// Six precision triples at three shifts on convection-diffusion.
    Precisions,
    /// Shift sweep in half/double/double on convection-diffusion.
    AlphaSweep,
    /// Three convection strengths at three shifts on the Sylvester equation.
    Sylvester,
}

#[derive(Debug, Args)]
pub struct TableArgs {
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    /// Problem; presets supply their own default.
    #[arg(long, value_parser = parse_from_str::<ProblemSpec>)]
    pub problem: Option<ProblemSpec>,
    /// Semicolon-separated precision triples.
    #[arg(long)]
    pub precs: Option<String>,
    /// Comma-separated shifts.
    #[arg(long)]
    pub alphas: Option<String>,
    #[command(flatten)]
    pub solver: SolverOptions,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(value_parser = parse_from_str::<ProblemSpec>)]
    pub problem: ProblemSpec,
    #[arg(long, default_value = "half,double,double", value_parser = parse_from_str::<Triple>)]
    pub prec: Triple,
    /// Comma-separated shifts.
    #[arg(long, default_value = "0.02,0.05,0.1,0.5,1,5,10,100")]
    pub alphas: String,
    #[command(flatten)]
    pub solver: SolverOptions,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum GenerationMode {
    Single,
    Double,
    Both,
}

#[derive(Debug, Args)]
pub struct GprArgs {
    /// Grid points per direction of the training instances.
    #[arg(long, default_value = "6,8,12,16")]
    pub sizes: String,
    /// Grid points per direction to predict for.
    #[arg(long, default_value = "32,64,128")]
    pub predict: String,
    /// Sizes per direction whose predictions are fed back before refitting.
    #[arg(long)]
    pub retrain: Option<String>,
    #[arg(long, value_enum, default_value_t = GenerationMode::Both)]
    pub precision: GenerationMode,
    #[arg(long, default_value_t = AlphaSearch::default().lo)]
    pub lo: f64,
    #[arg(long, default_value_t = AlphaSearch::default().hi)]
    pub hi: f64,
    #[arg(long, default_value_t = AlphaSearch::default().budget)]
    pub budget: usize,
    #[arg(long, default_value_t = AlphaSearch::default().xi)]
    pub xi: f64,
    /// Write each training set to `PREFIX_<precision>.csv`.
    #[arg(long)]
    pub training_out: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    #[arg(value_parser = parse_from_str::<ProblemSpec>)]
    pub problem: ProblemSpec,
    #[arg(long, default_value = "half,double,double", value_parser = parse_from_str::<Triple>)]
    pub prec: Triple,
    #[arg(long)]
    pub alpha: f64,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub phi2: Option<f64>,
    /// Skip the measured solve.
    #[arg(long)]
    pub no_solve: bool,
    #[command(flatten)]
    pub solver: SolverOptions,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_from_str<T: std::str::FromStr<Err = GadiError>>(s: &str) -> std::result::Result<T, String> {
    s.parse().map_err(|e: GadiError| e.to_string())
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    let items: Vec<T> = s
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse().map_err(|_| GadiError::Parse(format!("bad {what} `{t}`"))))
        .collect::<Result<_>>()?;
    if items.is_empty() {
        return Err(GadiError::Parse(format!("empty {what} list")));
    }
    Ok(items)
}

fn parse_triples(s: &str) -> Result<Vec<Triple>> {
    let t: Vec<Triple> =
        s.split(';').map(str::trim).filter(|t| !t.is_empty()).map(str::parse).collect::<Result<_>>()?;
    if t.is_empty() {
        return Err(GadiError::Parse("empty precision list".into()));
    }
    Ok(t)
}

/// Turn a `key = value` config file into long flags. Blank lines and lines
/// starting with `#` are skipped; `true`/`false` values toggle switches.
pub fn config_tokens(text: &str) -> Result<Vec<String>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| GadiError::Parse(format!("config line {}: expected key = value", lineno + 1)))?;
        let key = k.trim().replace('_', "-");
        let v = v.trim();
        match v {
            "true" => out.push(format!("--{key}")),
            "false" => {}
            _ => {
                out.push(format!("--{key}"));
                out.push(v.to_string());
            }
        }
    }
    Ok(out)
}

/// Splice `--config FILE` contents in right after the subcommand name so
/// that explicit flags, which come later, override them.
fn expand_config(args: Vec<String>) -> Result<Vec<String>> {
    let Some(pos) = args.iter().position(|a| a == "--config" || a.starts_with("--config=")) else {
        return Ok(args);
    };
    let mut args = args;
    let path = if let Some(p) = args[pos].strip_prefix("--config=") {
        let p = p.to_string();
        args.remove(pos);
        p
    } else {
        if pos + 1 >= args.len() {
            return Err(GadiError::Parse("--config needs a file".into()));
        }
        let p = args.remove(pos + 1);
        args.remove(pos);
        p
    };
    let text = std::fs::read_to_string(&path).map_err(|e| GadiError::Io(format!("{path}: {e}")))?;
    let tokens = config_tokens(&text)?;
    let at = 2.min(args.len());
    args.splice(at..at, tokens);
    Ok(args)
}

/// Parse arguments and run; returns the process exit code.
pub fn run<I: IntoIterator<Item = String>>(args: I) -> i32 {
    let args = match expand_config(args.into_iter().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let pool = match thread_pool() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    match pool.install(|| dispatch(cli.command)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}

fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("GADI_THREADS") {
        let n: usize = v.trim().parse().map_err(|_| GadiError::Parse(format!("GADI_THREADS=`{v}`")))?;
        b = b.num_threads(n.max(1));
    }
    b.build().map_err(|e| GadiError::Parameter(e.to_string()))
}

fn dispatch(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Solve(a) => cmd_solve(&a),
        Command::Table(a) => cmd_table(&a),
        Command::Gpr(a) => cmd_gpr(&a),
        Command::Bounds(a) => cmd_bounds(&a),
        Command::Sweep(a) => cmd_sweep(&a),
    }
}

fn emit(out: &Option<PathBuf>, body: &[u8]) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, body)?,
        None => {
            let mut so = std::io::stdout().lock();
            so.write_all(body)?;
            so.flush()?;
        }
    }
    Ok(())
}

fn json<T: Serialize>(v: &T) -> Result<Vec<u8>> {
    let mut s = serde_json::to_vec_pretty(v).map_err(|e| GadiError::Io(e.to_string()))?;
    s.push(b'\n');
    Ok(s)
}

/// Four significant digits in scientific notation.
pub fn sci(v: f64) -> String {
    format!("{v:.3e}")
}

#[derive(Debug, Serialize)]
pub struct SolveRecord {
    pub problem: String,
    pub alpha: f64,
    pub alpha_source: &'static str,
    pub precisions: Triple,
    pub omega: f64,
    pub xi: f64,
    /// `||x - x_exact||_inf`.
    pub forward_error: f64,
    pub report: SolveReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solution: Option<Vec<f64>>,
}

/// Shift predicted for a problem from a training CSV.
pub fn alpha_from_training(path: &Path, problem: &ProblemSpec) -> Result<f64> {
    let ts = TrainingSet::load(path)?;
    let m = GprModel::fit(&ts)?;
    Ok(m.predict_alpha(problem.order()).0)
}

pub fn cmd_solve(a: &SolveArgs) -> Result<i32> {
    let (alpha, alpha_source) = match (a.alpha, &a.gpr) {
        (Some(alpha), _) => (alpha, "given"),
        (None, Some(path)) => (alpha_from_training(path, &a.problem)?, "gpr"),
        (None, None) => return Err(GadiError::Parameter("solve needs --alpha or --gpr".into())),
    };
    let cfg = a.solver.config(alpha, a.prec);
    let inst = a.problem.instantiate()?;
    let x0 = a.solver.start(a.problem.order());
    let (x, report) = inst.solve(&cfg, &x0)?;
    let exact = inst.exact_solution();
    let forward_error = x.iter().zip(&exact).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
    let code = if report.status.is_converged() { 0 } else { EXIT_NOT_CONVERGED };
    let rec = SolveRecord {
        problem: a.problem.to_string(),
        alpha,
        alpha_source,
        precisions: a.prec,
        omega: cfg.omega,
        xi: cfg.xi,
        forward_error,
        report,
        solution: a.print_solution.then_some(x),
    };
    emit(&a.out, &json(&rec)?)?;
    Ok(code)
}

/// One table row.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub problem: ProblemSpec,
    pub prec: Triple,
    pub alpha: f64,
    pub outcome: std::result::Result<SolveReport, String>,
}

impl Cell {
    fn status_text(&self) -> String {
        match &self.outcome {
            Ok(r) => format!("{:?}", r.status),
            Err(_) => "Error".into(),
        }
    }

    /// Divergent and failed cells show `-` for the residual.
    fn rres_text(&self) -> String {
        match &self.outcome {
            Ok(r) if !is_dash(r.status) => sci(r.final_rres),
            _ => "-".into(),
        }
    }

    fn iters_text(&self) -> String {
        match &self.outcome {
            Ok(r) => r.outer_iters.to_string(),
            Err(_) => "-".into(),
        }
    }
}

/// Statuses the tables show as a dash.
pub fn is_dash(s: SolveStatus) -> bool {
    matches!(s, SolveStatus::Diverged | SolveStatus::OverflowDetected | SolveStatus::SingularInPrecision)
}

/// Run every `(problem, triple, alpha)` cell; cells run concurrently and
/// come back in input order. Failures are recorded in the cell.
pub fn run_cells(jobs: &[(ProblemSpec, Triple, f64)], solver: &SolverOptions) -> Vec<Cell> {
    jobs.par_iter()
        .map(|&(problem, prec, alpha)| {
            let outcome = problem
                .instantiate()
                .and_then(|inst| inst.solve(&solver.config(alpha, prec), &solver.start(problem.order())))
                .map(|(_, r)| r)
                .map_err(|e| e.to_string());
            Cell { problem, prec, alpha, outcome }
        })
        .collect()
}

pub fn cells_csv(cells: &[Cell]) -> String {
    let mut s = String::from("problem,u_r,u,u_f,alpha,status,rres,iters\n");
    for c in cells {
        s.push_str(&format!(
            "\"{}\",{},{},{},{},{},{},{}\n",
            c.problem,
            c.prec.u_r,
            c.prec.u,
            c.prec.u_f,
            sci(c.alpha),
            c.status_text(),
            c.rres_text(),
            c.iters_text()
        ));
    }
    s
}

fn precision_triples() -> Vec<Triple> {
    use FloatFormat::*;
    [
        (Double, Double, Double),
        (Single, Single, Single),
        (Single, Double, Double),
        (Half, Double, Single),
        (Half, Double, Double),
        (Half, Single, Single),
    ]
    .into_iter()
    .map(|(u_r, u, u_f)| Triple { u_r, u, u_f })
    .collect()
}

/// Jobs of a preset, in table order.
pub fn preset_jobs(p: Preset, problem: Option<ProblemSpec>) -> Result<Vec<(ProblemSpec, Triple, f64)>> {
    let hdd: Triple = "half,double,double".parse()?;
    let convdiff = problem.unwrap_or("convdiff3d:n=16".parse()?);
    Ok(match p {
        Preset::Precisions => {
            let mut jobs = Vec::new();
            for alpha in [0.01, 0.02, 10.0] {
                for t in precision_triples() {
                    jobs.push((convdiff, t, alpha));
                }
            }
            jobs
        }
        Preset::AlphaSweep => {
            [0.01, 0.02, 0.05, 0.1, 0.5, 1.0, 5.0, 10.0, 100.0].into_iter().map(|a| (convdiff, hdd, a)).collect()
        }
        Preset::Sylvester => {
            let n = match problem {
                Some(ProblemSpec::Sylvester(s)) => s.n,
                _ => 64,
            };
            let mut jobs = Vec::new();
            for r in [0.01, 0.1, 1.0] {
                let spec: ProblemSpec = format!("sylvester:n={n},r={r}").parse()?;
                for alpha in [0.01, 0.02, 10.0] {
                    jobs.push((spec, hdd, alpha));
                }
            }
            jobs
        }
    })
}

pub fn cmd_table(a: &TableArgs) -> Result<i32> {
    let jobs = match a.preset {
        Some(p) => {
            if a.precs.is_some() || a.alphas.is_some() {
                return Err(GadiError::Parameter("--precs/--alphas cannot be combined with --preset".into()));
            }
            preset_jobs(p, a.problem)?
        }
        None => {
            let problem = a.problem.ok_or_else(|| GadiError::Parameter("table needs --preset or --problem".into()))?;
            let triples = parse_triples(a.precs.as_deref().unwrap_or("double,double,double"))?;
            let alphas: Vec<f64> = parse_list(
                a.alphas.as_deref().ok_or_else(|| GadiError::Parameter("table needs --alphas".into()))?,
                "alpha",
            )?;
            let mut jobs = Vec::new();
            for &alpha in &alphas {
                for &t in &triples {
                    jobs.push((problem, t, alpha));
                }
            }
            jobs
        }
    };
    let cells = run_cells(&jobs, &a.solver);
    emit(&a.out, cells_csv(&cells).as_bytes())?;
    Ok(0)
}

pub fn cmd_sweep(a: &SweepArgs) -> Result<i32> {
    let alphas: Vec<f64> = parse_list(&a.alphas, "alpha")?;
    let jobs: Vec<_> = alphas.iter().map(|&al| (a.problem, a.prec, al)).collect();
    let cells = run_cells(&jobs, &a.solver);
    let mut s = String::from("alpha,status,iter,rres\n");
    for c in &cells {
        match &c.outcome {
            Ok(r) => {
                for (k, v) in r.rel_residual_history.iter().enumerate() {
                    s.push_str(&format!("{},{:?},{k},{}\n", sci(c.alpha), r.status, sci(*v)));
                }
            }
            Err(_) => s.push_str(&format!("{},Error,-,-\n", sci(c.alpha))),
        }
    }
    emit(&a.out, s.as_bytes())?;
    Ok(0)
}

/// Training, fit and prediction for one generation precision.
#[derive(Debug, Clone)]
pub struct GprRun {
    pub training: TrainingSet,
    pub model: GprModel,
    pub generation_seconds: f64,
}

pub fn gpr_run(sizes: &[usize], fmt: FloatFormat, search: &AlphaSearch, retrain: &[usize]) -> Result<GprRun> {
    let t = Instant::now();
    let training = convdiff_training_set(sizes, fmt, search)?;
    let generation_seconds = t.elapsed().as_secs_f64();
    let mut model = GprModel::fit(&training)?;
    if !retrain.is_empty() {
        let orders: Vec<usize> = retrain.iter().map(|n| n.pow(3)).collect();
        let extended = retrain_extend(&model, &training, &orders)?;
        model = GprModel::fit(&extended)?;
    }
    Ok(GprRun { training, model, generation_seconds })
}

pub fn cmd_gpr(a: &GprArgs) -> Result<i32> {
    let sizes: Vec<usize> = parse_list(&a.sizes, "size")?;
    let targets: Vec<usize> = parse_list(&a.predict, "size")?;
    let retrain: Vec<usize> = match &a.retrain {
        Some(s) => parse_list(s, "size")?,
        None => Vec::new(),
    };
    let search = AlphaSearch { lo: a.lo, hi: a.hi, budget: a.budget, xi: a.xi, ..AlphaSearch::default() };
    let formats = match a.precision {
        GenerationMode::Single => vec![FloatFormat::Single],
        GenerationMode::Double => vec![FloatFormat::Double],
        GenerationMode::Both => vec![FloatFormat::Single, FloatFormat::Double],
    };
    let mut runs = Vec::new();
    for &fmt in &formats {
        let run = gpr_run(&sizes, fmt, &search, &retrain)?;
        eprintln!("{fmt} training set generated in {:.3} s", run.generation_seconds);
        if let Some(prefix) = &a.training_out {
            let mut name = prefix.clone().into_os_string();
            name.push(format!("_{fmt}.csv"));
            run.training.save(Path::new(&name))?;
        }
        runs.push(run);
    }
    let mut s = String::from("n,order");
    for fmt in &formats {
        s.push_str(&format!(",alpha_{fmt},std_{fmt}"));
    }
    s.push('\n');
    for &n in &targets {
        s.push_str(&format!("{n},{}", n.pow(3)));
        for run in &runs {
            let (alpha, std) = run.model.predict_alpha(n.pow(3));
            s.push_str(&format!(",{},{}", sci(alpha), sci(std)));
        }
        s.push('\n');
    }
    emit(&a.out, s.as_bytes())?;
    Ok(0)
}

#[derive(Debug, Serialize)]
pub struct BoundsRecord {
    pub problem: String,
    pub alpha: f64,
    pub precisions: Triple,
    pub bounds: BoundReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub measured_status: Option<SolveStatus>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub measured_rres: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub measured_iters: Option<usize>,
}

pub fn cmd_bounds(a: &BoundsArgs) -> Result<i32> {
    let inst = a.problem.instantiate()?;
    let (mat, split) = inst.explicit()?;
    let base = default_constants(&mat, &split, a.alpha, a.solver.omega, a.prec.u_r)?;
    let c = BoundConstants {
        lambda: a.lambda.unwrap_or(base.lambda),
        theta: a.theta.unwrap_or(base.theta),
        eta: a.eta.unwrap_or(base.eta),
        gamma: a.gamma.unwrap_or(base.gamma),
        phi2_of_n: a.phi2.unwrap_or(base.phi2_of_n),
    };
    let bounds = predict(&split, a.alpha, a.solver.omega, (a.prec.u_r, a.prec.u, a.prec.u_f), &c)?;
    let mut rec = BoundsRecord {
        problem: a.problem.to_string(),
        alpha: a.alpha,
        precisions: a.prec,
        bounds,
        measured_status: None,
        measured_rres: None,
        measured_iters: None,
    };
    if !a.no_solve {
        let (_, r) = inst.solve(&a.solver.config(a.alpha, a.prec), &a.solver.start(a.problem.order()))?;
        rec.measured_status = Some(r.status);
        rec.measured_rres = Some(r.final_rres);
        rec.measured_iters = Some(r.outer_iters);
    }
    emit(&a.out, &json(&rec)?)?;
    Ok(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triples_and_lists() {
        let t: Triple = "half, double ,single".parse().unwrap();
        assert_eq!((t.u_r, t.u, t.u_f), (FloatFormat::Half, FloatFormat::Double, FloatFormat::Single));
        assert!("half,double".parse::<Triple>().is_err());
        assert!("half,double,quad".parse::<Triple>().is_err());
        assert_eq!(parse_triples("double,double,double; half,double,double").unwrap().len(), 2);
        assert_eq!(parse_list::<f64>("0.01, 10", "alpha").unwrap(), vec![0.01, 10.0]);
        assert!(parse_list::<f64>(" , ", "alpha").is_err());
    }

    #[test]
    fn config_lines_become_flags() {
        let toks =
            config_tokens("# comment\nalpha = 0.5\n\nresidual_scaling = true\nprint_solution = false\n").unwrap();
        assert_eq!(toks, vec!["--alpha", "0.5", "--residual-scaling"]);
        assert!(config_tokens("alpha 0.5").is_err());
    }

    #[test]
    fn preset_sizes() {
        assert_eq!(preset_jobs(Preset::Precisions, None).unwrap().len(), 18);
        assert_eq!(preset_jobs(Preset::AlphaSweep, None).unwrap().len(), 9);
        let syl = preset_jobs(Preset::Sylvester, None).unwrap();
        assert_eq!(syl.len(), 9);
        assert_eq!(syl[0].0.to_string(), "sylvester:n=64,r=0.01");
    }

    #[test]
    fn four_significant_digits() {
        assert_eq!(sci(9.964e-14), "9.964e-14");
        assert_eq!(sci(0.02), "2.000e-2");
    }

    #[test]
    fn dash_cells() {
        let mut report = SolveReport {
            status: SolveStatus::Diverged,
            outer_iters: 3,
            rel_residual_history: vec![1.0, 10.0, 1e3, 1e7],
            final_rres: 1e7,
            inner_iter_totals: 0,
            inner_stagnations: 0,
            rounding: Default::default(),
            message: None,
        };
        let problem: ProblemSpec = "convdiff3d:n=2".parse().unwrap();
        let prec: Triple = "half,double,double".parse().unwrap();
        let cell = Cell { problem, prec, alpha: 0.01, outcome: Ok(report.clone()) };
        assert_eq!(cell.rres_text(), "-");
        report.status = SolveStatus::Converged;
        let cell = Cell { problem, prec, alpha: 0.01, outcome: Ok(report) };
        assert_eq!(cell.rres_text(), "1.000e7");
    }
}
