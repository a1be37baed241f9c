//! The `monodual` command line.
//!
//! Every subcommand reads one JSON input (a rate matrix or a Lévy model),
//! writes a JSON report to stdout or `--out`, and signals the outcome only
//! through the exit status: 0 passed, 1 a check failed, 2 the input did not
//! parse, 3 an internal or numerical error.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::dualgen::{dual_convergence, dual_generator_coeffs, CompensatorConvention, DualGenError, TestFunction};
use crate::generator::{
    check_levy_monotone, classify_boundary, discretize, validate_model, GeneratorError, Lattice, LevyModel,
    LEVY_MONO_TOL,
};
use crate::qmatrix::{
    check_monotone_with_tol, check_stochastic_dominance, dual_qmatrix, default_margin, transition_matrix,
    validate_qmatrix, verify_duality_with_margin, Boundary, QMatrixError, RateMatrix, TOL_MONO,
};
use crate::simulate::{mc_duality_check, mc_growth_bound, mc_survival, sample_path, SimError};

pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "monodual", version, about = "Stochastically monotone Markov chains and their duals")]
pub struct RunConfig {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub opts: Overrides,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Check a rate matrix or a model (coefficients, moments, growth)
    Validate,
    /// Check stochastic monotonicity of a rate matrix or a model's kernels
    Monotone,
    /// Emit the dual rate matrix of a monotone chain
    Dual,
    /// Emit the lattice chain of a model (needs --h and --window)
    Discretize,
    /// Transition matrix at --t and its stochastic dominance check
    Evolve,
    /// Compare both sides of the duality identity at --t
    Duality,
    /// Sample paths or run a Monte Carlo check (see --target)
    Simulate,
    /// Classify the boundary at 0 of a half-line model
    Boundary,
    /// Dual generator coefficients of a model, or their lattice convergence with --hs
    Dualgen,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum SimTarget {
    /// one path from --x0
    Path,
    /// P(X_t >= y) from --x0
    #[default]
    Survival,
    /// both sides of the duality identity for --pairs
    Duality,
    /// E|X_t| against the growth bound (model input)
    Growth,
}

#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// input JSON: a rate matrix `{lo, hi, boundary, rates}` or a model
    #[arg(long = "in", global = true, value_name = "PATH")]
    pub input: Option<PathBuf>,
    /// report destination (default stdout)
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// time horizon [default: 1]
    #[arg(long, global = true)]
    pub t: Option<f64>,
    /// lattice mesh; for validate/monotone/dualgen on models, the grid step [default: 0.1]
    #[arg(long, global = true)]
    pub h: Option<f64>,
    /// window LO:HI (lattice states for rate matrices, coordinates for models) [default: -5:5]
    #[arg(long, global = true, value_name = "LO:HI", allow_hyphen_values = true)]
    pub window: Option<String>,
    /// Monte Carlo replicates [default: 10000]
    #[arg(long, global = true)]
    pub reps: Option<u64>,
    /// random seed [default: 0]
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// states excluded at each window edge by `duality` [default: a quarter of the window]
    #[arg(long, global = true)]
    pub margin: Option<i64>,
    /// check tolerance [defaults: monotone 1e-12, model monotone 1e-9, duality 1e-8, evolve dominance 1e-10]
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// worker threads, 0 for all cores
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    /// start point (state for rate matrices, coordinate for models) [default: 0]
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub x0: Option<f64>,
    /// survival threshold for `simulate --target survival` [default: x0]
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub y: Option<i64>,
    /// (x, y) pairs as `x:y,x:y` for `simulate --target duality`
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub pairs: Option<String>,
    /// growth constant for `simulate --target growth` [default: the model's growth_c]
    #[arg(long, global = true)]
    pub c: Option<f64>,
    /// what `simulate` runs
    #[arg(long, global = true, value_enum)]
    pub target: Option<SimTarget>,
    /// boundary policy for discretised models [default: reflect]
    #[arg(long, global = true)]
    pub boundary: Option<Boundary>,
    /// mesh sizes `h1,h2,...` for the `dualgen` convergence study
    #[arg(long, global = true)]
    pub hs: Option<String>,
    /// compensator convention for `dualgen` [default: jump_size]
    #[arg(long, global = true)]
    pub convention: Option<CompensatorConvention>,
    /// CSV curve output: dominance margins (evolve), error vs h or coefficient table (dualgen)
    #[arg(long, global = true, value_name = "PATH")]
    pub csv: Option<PathBuf>,
    /// per-path CSV trace (simulate --target path)
    #[arg(long, global = true, value_name = "PATH")]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) => EXIT_PARSE,
            CliError::Internal(_) => EXIT_INTERNAL,
        }
    }
}

/// A finished command: the report and whether its check passed.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub report: Value,
    pub passed: bool,
}

impl Outcome {
    fn pass(report: impl Serialize) -> Result<Self, CliError> {
        Ok(Outcome {
            report: to_value(report)?,
            passed: true,
        })
    }

    fn check(report: impl Serialize, passed: bool) -> Result<Self, CliError> {
        Ok(Outcome {
            report: to_value(report)?,
            passed,
        })
    }

    fn failed(error: impl std::fmt::Display, detail: Value) -> Self {
        Outcome {
            report: json!({ "error": error.to_string(), "detail": detail }),
            passed: false,
        }
    }

    pub fn exit_code(&self) -> i32 {
        if self.passed {
            0
        } else {
            EXIT_CHECK_FAILED
        }
    }
}

fn to_value(v: impl Serialize) -> Result<Value, CliError> {
    serde_json::to_value(v).map_err(|e| CliError::Internal(e.to_string()))
}

enum Input {
    Chain(RateMatrix),
    Model(Box<LevyModel>),
}

fn read_input(path: Option<&Path>) -> Result<Input, CliError> {
    let path = path.ok_or_else(|| CliError::Parse("--in is required".into()))?;
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
    let value: Value = serde_json::from_str(&text).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
    if value.get("rates").is_some() {
        let q = RateMatrix::from_json(&text).map_err(|e| CliError::Parse(e.to_string()))?;
        // a negative rate in the file is a schema error, not a failed check
        validate_qmatrix(&q).map_err(|e| CliError::Parse(e.to_string()))?;
        Ok(Input::Chain(q))
    } else {
        LevyModel::from_json(&text)
            .map(|m| Input::Model(Box::new(m)))
            .map_err(|e| CliError::Parse(e.to_string()))
    }
}

fn chain(path: Option<&Path>) -> Result<RateMatrix, CliError> {
    match read_input(path)? {
        Input::Chain(q) => Ok(q),
        Input::Model(_) => Err(CliError::Parse("expected a rate matrix (an object with `rates`)".into())),
    }
}

fn model(path: Option<&Path>) -> Result<LevyModel, CliError> {
    match read_input(path)? {
        Input::Model(m) => Ok(*m),
        Input::Chain(_) => Err(CliError::Parse("expected a model, got a rate matrix".into())),
    }
}

fn parse_window(s: &str) -> Result<(f64, f64), CliError> {
    let bad = || CliError::Parse(format!("window must be LO:HI, got `{s}`"));
    let (lo, hi) = s.split_once(':').ok_or_else(bad)?;
    let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
    if !(lo < hi) {
        return Err(bad());
    }
    Ok((lo, hi))
}

fn parse_list(s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|v| {
            v.trim()
                .parse()
                .map_err(|_| CliError::Parse(format!("bad number `{v}` in `{s}`")))
        })
        .collect()
}

fn parse_pairs(s: &str) -> Result<Vec<(i64, i64)>, CliError> {
    s.split(',')
        .map(|p| {
            let bad = || CliError::Parse(format!("pair must be x:y, got `{p}`"));
            let (x, y) = p.split_once(':').ok_or_else(bad)?;
            Ok((x.trim().parse().map_err(|_| bad())?, y.trim().parse().map_err(|_| bad())?))
        })
        .collect()
}

fn whole_state(x: f64) -> Result<i64, CliError> {
    if x.fract() != 0.0 {
        return Err(CliError::Parse(format!("state must be an integer, got {x}")));
    }
    Ok(x as i64)
}

impl Overrides {
    fn t(&self) -> f64 {
        self.t.unwrap_or(1.0)
    }

    fn window(&self) -> Result<(f64, f64), CliError> {
        self.window.as_deref().map(parse_window).unwrap_or(Ok((-5.0, 5.0)))
    }

    fn step(&self) -> Result<f64, CliError> {
        let h = self.h.unwrap_or(0.1);
        if !(h > 0.0) {
            return Err(CliError::Parse(format!("--h must be positive, got {h}")));
        }
        Ok(h)
    }

    /// Evenly spaced points of the window with spacing `--h`.
    fn grid(&self) -> Result<Vec<f64>, CliError> {
        let (lo, hi) = self.window()?;
        let h = self.step()?;
        let n = ((hi - lo) / h + 1e-9).floor() as usize;
        Ok((0..=n).map(|i| lo + i as f64 * h).collect())
    }

    fn lattice(&self) -> Result<Lattice, CliError> {
        let h = self
            .h
            .ok_or_else(|| CliError::Parse("--h is required for discretisation".into()))?;
        let (lo, hi) = self.window()?;
        Lattice::covering(h, lo, hi, self.boundary.unwrap_or(Boundary::Reflect)).map_err(|e| CliError::Parse(e.to_string()))
    }

    fn reps(&self) -> u64 {
        self.reps.unwrap_or(10_000)
    }

    fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }
}

fn internal(e: impl std::fmt::Display) -> CliError {
    CliError::Internal(e.to_string())
}

fn from_qmatrix(e: QMatrixError) -> Result<Outcome, CliError> {
    match e {
        QMatrixError::NotMonotone(report) => Ok(Outcome::failed("chain is not stochastically monotone", to_value(&*report)?)),
        QMatrixError::DualRateNegative { .. } => Ok(Outcome::failed(&e, Value::Null)),
        QMatrixError::InvalidTime(_) | QMatrixError::InvalidTolerance(_) => Err(CliError::Parse(e.to_string())),
        e => Err(internal(e)),
    }
}

fn from_generator(e: GeneratorError) -> Result<Outcome, CliError> {
    match e {
        GeneratorError::GrowthViolated { .. }
        | GeneratorError::MomentUnbounded { .. }
        | GeneratorError::NegativeDiffusion { .. }
        | GeneratorError::NegativeKernelMass { .. } => Ok(Outcome::failed(&e, Value::Null)),
        GeneratorError::InvalidLattice(_) | GeneratorError::EmptyGrid | GeneratorError::Spec(_) | GeneratorError::Expr(_) => {
            Err(CliError::Parse(e.to_string()))
        }
        GeneratorError::QMatrix(e) => from_qmatrix(e),
        e => Err(internal(e)),
    }
}

fn from_sim(e: SimError) -> Result<Outcome, CliError> {
    match e {
        SimError::WindowEscape { .. } => Ok(Outcome::failed(&e, Value::Null)),
        SimError::StartOutsideWindow { .. } | SimError::InvalidTime(_) | SimError::NoReplicates => {
            Err(CliError::Parse(e.to_string()))
        }
        SimError::QMatrix(e) => from_qmatrix(e),
        SimError::Generator(e) => from_generator(e),
    }
}

fn from_dualgen(e: DualGenError) -> Result<Outcome, CliError> {
    match e {
        DualGenError::NegativeDualDensity { .. } | DualGenError::UnsupportedKernelCase(_) => {
            Ok(Outcome::failed(&e, Value::Null))
        }
        DualGenError::NotOnLattice { .. } | DualGenError::UnboundedModel => Err(CliError::Parse(e.to_string())),
        DualGenError::Generator(e) => from_generator(e),
        DualGenError::QMatrix(e) => from_qmatrix(e),
        e => Err(internal(e)),
    }
}

fn csv_file(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| internal(format!("{}: {e}", path.display())))
}

fn run_validate(o: &Overrides) -> Result<Outcome, CliError> {
    match read_input(o.input.as_deref())? {
        Input::Chain(q) => Outcome::pass(validate_qmatrix(&q).map_err(internal)?),
        Input::Model(m) => match validate_model(&m, &o.grid()?) {
            Ok(r) => Outcome::check(&r, r.valid),
            Err(e) => from_generator(e),
        },
    }
}

fn run_monotone(o: &Overrides) -> Result<Outcome, CliError> {
    match read_input(o.input.as_deref())? {
        Input::Chain(q) => {
            let r = check_monotone_with_tol(&q, o.tol.unwrap_or(TOL_MONO));
            Outcome::check(&r, r.monotone)
        }
        Input::Model(m) => {
            let grid = o.grid()?;
            let h = o.step()?;
            // thresholds h, 2h, ..., up to the window width
            let width = grid.last().unwrap_or(&0.0) - grid.first().unwrap_or(&0.0);
            let thresholds: Vec<f64> = (1..).map(|k| k as f64 * h).take_while(|&a| a <= width.max(h)).collect();
            match check_levy_monotone(&m, &grid, &thresholds, o.tol.unwrap_or(LEVY_MONO_TOL)) {
                Ok(r) => Outcome::check(&r, r.monotone),
                Err(e) => from_generator(e),
            }
        }
    }
}

fn run_dual(o: &Overrides) -> Result<Outcome, CliError> {
    let q = chain(o.input.as_deref())?;
    match dual_qmatrix(&q) {
        Ok(d) => Outcome::pass(&d),
        Err(e) => from_qmatrix(e),
    }
}

fn run_discretize(o: &Overrides) -> Result<Outcome, CliError> {
    let m = model(o.input.as_deref())?;
    match discretize(&m, &o.lattice()?) {
        Ok(q) => Outcome::pass(&q),
        Err(e) => from_generator(e),
    }
}

fn run_evolve(o: &Overrides) -> Result<Outcome, CliError> {
    let q = chain(o.input.as_deref())?;
    let tol = o.tol.unwrap_or(1e-10);
    let p = match transition_matrix(&q, o.t(), 1e-13) {
        Ok(p) => p,
        Err(e) => return from_qmatrix(e),
    };
    let dom = match transition_matrix(&q.with_cemeteries(), o.t(), 1e-13) {
        Ok(ext) => check_stochastic_dominance(&ext, tol),
        Err(e) => return from_qmatrix(e),
    };
    if let Some(path) = &o.csv {
        let mut w = csv::Writer::from_writer(csv_file(path)?);
        w.write_record(["l", "min_margin"]).map_err(internal)?;
        for (l, m) in &dom.margin_by_threshold {
            w.write_record([l.to_string(), m.to_string()]).map_err(internal)?;
        }
        w.flush().map_err(internal)?;
    }
    let passed = dom.dominant;
    Outcome::check(json!({ "transition": p, "dominance": dom }), passed)
}

fn run_duality(o: &Overrides) -> Result<Outcome, CliError> {
    let q = chain(o.input.as_deref())?;
    let margin = o.margin.unwrap_or_else(|| default_margin(&q));
    match verify_duality_with_margin(&q, o.t(), o.tol.unwrap_or(1e-8), margin) {
        Ok(r) => {
            let passed = r.holds;
            Outcome::check(r, passed)
        }
        Err(e) => from_qmatrix(e),
    }
}

fn run_simulate(o: &Overrides) -> Result<Outcome, CliError> {
    let (t, reps, seed) = (o.t(), o.reps(), o.seed());
    let x0 = o.x0.unwrap_or(0.0);
    match o.target.unwrap_or_default() {
        SimTarget::Path => {
            let q = chain(o.input.as_deref())?;
            let p = match sample_path(&q, whole_state(x0)?, t, seed) {
                Ok(p) => p,
                Err(e) => return from_sim(e),
            };
            if let Some(path) = &o.trace {
                p.write_csv(csv_file(path)?).map_err(internal)?;
            }
            Outcome::pass(p)
        }
        SimTarget::Survival => {
            let q = chain(o.input.as_deref())?;
            let x0 = whole_state(x0)?;
            match mc_survival(&q, x0, o.y.unwrap_or(x0), t, reps, seed) {
                Ok(e) => Outcome::pass(e),
                Err(e) => from_sim(e),
            }
        }
        SimTarget::Duality => {
            let q = chain(o.input.as_deref())?;
            let pairs = o
                .pairs
                .as_deref()
                .ok_or_else(|| CliError::Parse("--pairs is required for the duality target".into()))
                .and_then(parse_pairs)?;
            match mc_duality_check(&q, &pairs, t, reps, seed) {
                Ok(r) => {
                    let passed = r.consistent;
                    Outcome::check(r, passed)
                }
                Err(e) => from_sim(e),
            }
        }
        SimTarget::Growth => {
            let m = model(o.input.as_deref())?;
            let c = o
                .c
                .or(m.growth_c)
                .ok_or_else(|| CliError::Parse("--c is required when the model has no growth_c".into()))?;
            match mc_growth_bound(&m, &o.lattice()?, x0, t, c, reps, seed) {
                Ok(r) => {
                    let passed = r.holds;
                    Outcome::check(r, passed)
                }
                Err(e) => from_sim(e),
            }
        }
    }
}

fn run_boundary(o: &Overrides) -> Result<Outcome, CliError> {
    let m = model(o.input.as_deref())?;
    Outcome::pass(classify_boundary(&m, None))
}

fn run_dualgen(o: &Overrides) -> Result<Outcome, CliError> {
    let m = model(o.input.as_deref())?;
    let convention = o.convention.unwrap_or_default();
    if let Some(hs) = &o.hs {
        let hs = parse_list(hs)?;
        let xs = o.grid()?;
        let r = match dual_convergence(&m, &TestFunction::gaussian_bump(), &xs, &hs, convention) {
            Ok(r) => r,
            Err(e) => return from_dualgen(e),
        };
        if let Some(path) = &o.csv {
            r.write_csv(csv_file(path)?).map_err(internal)?;
        }
        let passed = r.converges();
        return Outcome::check(r, passed);
    }
    let xs = o.grid()?;
    let ys: Vec<f64> = (1..=10).map(|k| k as f64 * 0.25).collect();
    let table = match dual_generator_coeffs(&m).and_then(|c| c.tabulate(&xs, &ys)) {
        Ok(t) => t,
        Err(e) => return from_dualgen(e),
    };
    if let Some(path) = &o.csv {
        table.write_csv(csv_file(path)?).map_err(internal)?;
    }
    Outcome::pass(table)
}

/// Dispatches the command on a thread pool sized by `--threads`.
pub fn run(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.opts.threads)
        .build()
        .map_err(internal)?;
    let o = &cfg.opts;
    pool.install(|| match cfg.command {
        Command::Validate => run_validate(o),
        Command::Monotone => run_monotone(o),
        Command::Dual => run_dual(o),
        Command::Discretize => run_discretize(o),
        Command::Evolve => run_evolve(o),
        Command::Duality => run_duality(o),
        Command::Simulate => run_simulate(o),
        Command::Boundary => run_boundary(o),
        Command::Dualgen => run_dualgen(o),
    })
}

fn emit(report: &Value, out: Option<&Path>) -> io::Result<()> {
    let text = serde_json::to_string_pretty(report).map_err(io::Error::other)?;
    match out {
        Some(path) => std::fs::write(path, text + "\n"),
        None => writeln!(io::stdout().lock(), "{text}"),
    }
}

/// Runs `cfg`, writes the report, and returns the exit status.
pub fn execute(cfg: &RunConfig) -> i32 {
    match run(cfg) {
        Ok(outcome) => match emit(&outcome.report, cfg.opts.out.as_deref()) {
            Ok(()) => outcome.exit_code(),
            Err(e) => {
                log::error!("writing the report: {e}");
                EXIT_INTERNAL
            }
        },
        Err(e) => {
            log::error!("{e}");
            eprintln!("{e}");
            e.exit_code()
        }
    }
}
