//! Command-line front end.
//!
//! Every subcommand writes deterministic CSV (default) or JSON to stdout or
//! `--output`. Errors go to stderr as one JSON object and map to exit codes
//! 1 (assertion or numerical failure), 2 (invalid input or regime) and
//! 3 (resource cap).

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::full_sim::{self, FullSimulator, DEFAULT_CAP};
use crate::optimizer::{self, grid_oracle, OptimizationResult};
use crate::perturbation::{
    beta_critical, g_of_beta, theorem1_report, theorem2_check, theorem2_report, PerturbationReport,
    PerturbedFamily, BETA_MAX,
};
use crate::problem::{
    make_problem, make_problem_relaxed, random_problem, rational_to_f64, BlockModel, Problem,
    ProblemSpec,
};
use crate::reduced_sim::{self, ReducedState, Schedule};

#[derive(Debug, Parser)]
#[command(
    name = "qpsearch",
    version,
    about = "Partial search with unevenly distributed targets"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run Steps 1-3 for a schedule and report the measured state.
    ///
    /// CSV columns: engine, N, j1, j2, success, u, norm, max_abs_diff, state.
    /// `u` is the unmarked-block amplitude after Step 3; `max_abs_diff`
    /// compares the projected full state with the reduced one (engine both);
    /// `state` lists the reduced amplitudes `t_1;ntt_1;...;u`.
    Simulate(SimulateArgs),
    /// Optimal (eta, alpha) in the large-block limit.
    ///
    /// CSV columns: method, K, b, t, z, tau_bar, beta, alpha_star, eta_star,
    /// f_star, queries_leading, full_search_queries, roots_found.
    Optimize(OptimizeArgs),
    /// Tabulate g(beta) on [0, 3/4) and locate its root beta_c.
    ///
    /// CSV columns: beta, g, kind (`sample`, or `beta_c` for the root row).
    SweepBeta(SweepBetaArgs),
    /// Compare the measured penalty of uneven instances with the
    /// second-order prediction.
    ///
    /// CSV columns: K, t, tau_bar, beta, eps_scale, variance, delta_alpha,
    /// delta_eta, predicted, measured, ratio. `measured` is NaN where the
    /// optimizer is not valid for that beta; K is inf for --theorem 1.
    PerturbCheck(PerturbCheckArgs),
    /// Check the reduced simulator against the full statevector on random instances.
    ///
    /// CSV columns: instance, K, b, t, N, taus, max_abs_diff, pass.
    OracleCompare(OracleCompareArgs),
    /// Validate an instance and print its derived quantities as JSON.
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Engine {
    Reduced,
    Full,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Oracle {
    Grid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Theorem {
    #[value(name = "1")]
    ManyBlocks,
    #[value(name = "2")]
    FiniteK,
}

/// Comma-separated list, e.g. `3,1,2`.
#[derive(Debug, Clone, PartialEq)]
pub struct List<T>(pub Vec<T>);

impl<T: FromStr> FromStr for List<T>
where
    T::Err: std::fmt::Display,
{
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let items = s
            .split(',')
            .map(|item| {
                let item = item.trim();
                item.parse::<T>()
                    .map_err(|e| format!("bad list entry {item:?}: {e}"))
            })
            .collect::<std::result::Result<Vec<T>, String>>()?;
        if items.is_empty() {
            return Err("empty list".into());
        }
        Ok(List(items))
    }
}

#[derive(Debug, Args)]
pub struct InstanceArgs {
    /// Number of blocks.
    #[arg(long = "K")]
    pub k: Option<u64>,
    /// Items per block.
    #[arg(long)]
    pub b: Option<u64>,
    /// Targets per marked block, comma separated.
    #[arg(long)]
    pub taus: Option<List<u64>>,
    /// JSON file `{"K": .., "b": .., "taus": [..]}`; replaces the three flags above.
    #[arg(long, conflicts_with_all = ["k", "b", "taus"])]
    pub problem: Option<PathBuf>,
}

impl InstanceArgs {
    fn spec(&self) -> Result<ProblemSpec> {
        if let Some(path) = &self.problem {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", path.display())))?;
            return serde_json::from_str(&text)
                .map_err(|e| Error::InvalidInput(format!("problem JSON: {e}")));
        }
        match (self.k, self.b, &self.taus) {
            (Some(k), Some(b), Some(List(taus))) => Ok(ProblemSpec {
                k,
                b,
                taus: taus.clone(),
            }),
            _ => Err(Error::InvalidInput(
                "need --K, --b and --taus, or --problem".into(),
            )),
        }
    }

    fn resolve(&self) -> Result<Problem> {
        let spec = self.spec()?;
        let problem = make_problem(spec.k, spec.b, &spec.taus)?;
        warn_if_not_power_of_two(&problem);
        Ok(problem)
    }
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Write to this file instead of stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

impl OutputArgs {
    fn sink(&self) -> Result<Box<dyn Write>> {
        Ok(match &self.output {
            Some(path) => Box::new(BufWriter::new(File::create(path).map_err(|e| {
                Error::InvalidInput(format!("cannot create {}: {e}", path.display()))
            })?)),
            None => Box::new(BufWriter::new(io::stdout().lock())),
        })
    }

    fn write_rows<T: Serialize>(&self, rows: &[T]) -> Result<()> {
        let mut out = self.sink()?;
        match self.format {
            Format::Csv => {
                let mut writer = csv::Writer::from_writer(&mut out);
                for row in rows {
                    writer.serialize(row).map_err(io_error)?;
                }
                writer.flush().map_err(io_error)?;
            }
            Format::Json => write_json(&mut out, &rows)?,
        }
        out.flush().map_err(io_error)
    }
}

fn write_json<W: Write, T: Serialize + ?Sized>(out: &mut W, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, value).map_err(io_error)?;
    writeln!(out).map_err(io_error)
}

fn io_error<E: std::fmt::Display>(e: E) -> Error {
    Error::InvalidInput(format!("output: {e}"))
}

fn warn_if_not_power_of_two(problem: &Problem) {
    if !problem.geometry().is_power_of_two() {
        eprintln!("warning: N = {} is not a power of two", problem.n());
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub instance: InstanceArgs,
    /// Global iterations.
    #[arg(long)]
    pub j1: f64,
    /// Local iterations.
    #[arg(long)]
    pub j2: f64,
    /// Allow real j1, j2 through the closed-form evolution (reduced engine only).
    #[arg(long)]
    pub real: bool,
    #[arg(long, value_enum, default_value_t = Engine::Reduced)]
    pub engine: Engine,
    /// Largest N the full engine will allocate.
    #[arg(long, default_value_t = DEFAULT_CAP)]
    pub max_n: u64,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Serialize)]
struct SimulateRow {
    engine: &'static str,
    #[serde(rename = "N")]
    n: u64,
    j1: f64,
    j2: f64,
    success: f64,
    u: f64,
    norm: f64,
    max_abs_diff: Option<f64>,
    state: String,
}

fn simulate(args: &SimulateArgs) -> Result<()> {
    let problem = args.instance.resolve()?;
    let schedule = if args.real {
        if args.engine != Engine::Reduced {
            return Err(Error::InvalidInput("--real needs --engine reduced".into()));
        }
        Schedule::real(args.j1, args.j2)?
    } else {
        if !(args.j1 >= 0.0 && args.j2 >= 0.0 && args.j1.fract() == 0.0 && args.j2.fract() == 0.0) {
            return Err(Error::InvalidInput(format!(
                "j1, j2 must be nonnegative integers without --real, got {}, {}",
                args.j1, args.j2
            )));
        }
        Schedule::integer(args.j1 as u64, args.j2 as u64)
    };

    let mut states: Vec<(&'static str, ReducedState, f64)> = Vec::new();
    if args.engine != Engine::Full {
        let state = reduced_sim::run(&problem, &schedule)?;
        let success = reduced_sim::success_probability(&problem, &state);
        states.push(("reduced", state, success));
    }
    if args.engine != Engine::Reduced {
        let sim = FullSimulator::new(&problem, args.max_n)?;
        let full = sim.run_partial_search(schedule.j1 as u64, schedule.j2 as u64);
        let success = sim.success_probability(&full);
        states.push(("full", sim.project_to_reduced(&full)?, success));
    }
    let max_abs_diff = match states.as_slice() {
        [(_, a, _), (_, b, _)] => Some(a.max_abs_diff(b)),
        _ => None,
    };

    let rows: Vec<SimulateRow> = states
        .iter()
        .map(|(engine, state, success)| SimulateRow {
            engine,
            n: problem.n(),
            j1: schedule.j1,
            j2: schedule.j2,
            success: *success,
            u: state.u(),
            norm: state.norm_sqr().sqrt(),
            max_abs_diff,
            state: state
                .amps()
                .iter()
                .map(f64::to_string)
                .collect::<Vec<_>>()
                .join(";"),
        })
        .collect();
    args.out.write_rows(&rows)
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[command(flatten)]
    pub instance: InstanceArgs,
    /// Also run an independent optimizer and report it as a second row.
    #[arg(long, value_enum)]
    pub oracle: Option<Oracle>,
    #[arg(long, default_value_t = 100_000)]
    pub grid_points: usize,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Serialize)]
struct OptimizeRow {
    method: optimizer::Method,
    #[serde(rename = "K")]
    k: u64,
    b: u64,
    t: usize,
    z: u64,
    tau_bar: f64,
    beta: f64,
    alpha_star: f64,
    eta_star: f64,
    f_star: f64,
    queries_leading: Option<f64>,
    full_search_queries: f64,
    roots_found: usize,
}

impl OptimizeRow {
    fn new(problem: &Problem, result: &OptimizationResult) -> Self {
        Self {
            method: result.method,
            k: problem.k(),
            b: problem.b(),
            t: problem.t(),
            z: problem.z(),
            tau_bar: rational_to_f64(problem.distribution().tau_bar()),
            beta: rational_to_f64(problem.beta()),
            alpha_star: result.alpha_star,
            eta_star: result.eta_star,
            f_star: result.f_star,
            queries_leading: result.queries_leading,
            full_search_queries: optimizer::full_search_queries(problem),
            roots_found: result.roots_found,
        }
    }
}

fn optimize(args: &OptimizeArgs) -> Result<()> {
    let problem = args.instance.resolve()?;
    let mut results = vec![optimizer::optimize(&problem)?];
    if let Some(Oracle::Grid) = args.oracle {
        results.push(
            grid_oracle(&BlockModel::from(&problem), args.grid_points)?.with_queries(&problem),
        );
    }
    let rows: Vec<OptimizeRow> = results
        .iter()
        .map(|r| OptimizeRow::new(&problem, r))
        .collect();
    args.out.write_rows(&rows)
}

#[derive(Debug, Args)]
pub struct SweepBetaArgs {
    /// Number of equally spaced samples on [0, 3/4).
    #[arg(long, default_value_t = 150)]
    pub points: usize,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Serialize)]
struct SweepRow {
    beta: f64,
    g: f64,
    kind: &'static str,
}

fn sweep_beta(args: &SweepBetaArgs) -> Result<()> {
    if args.points == 0 {
        return Err(Error::InvalidInput("--points must be positive".into()));
    }
    let mut rows = (0..args.points)
        .map(|i| {
            let beta = BETA_MAX * i as f64 / args.points as f64;
            Ok(SweepRow {
                beta,
                g: g_of_beta(beta)?,
                kind: "sample",
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let beta_c = beta_critical();
    rows.push(SweepRow {
        beta: beta_c,
        g: g_of_beta(beta_c)?,
        kind: "beta_c",
    });
    args.out.write_rows(&rows)
}

#[derive(Debug, Args)]
pub struct PerturbCheckArgs {
    /// 1: K -> infinity law; 2: finite-K lower bound.
    #[arg(long, value_enum, default_value_t = Theorem::FiniteK)]
    pub theorem: Theorem,
    /// Values of beta = t/K (ignored by --theorem 1).
    #[arg(long, default_value = "0.05,0.1,0.2")]
    pub betas: List<f64>,
    /// Perturbation scales, the largest relative deviation of any tau_i.
    #[arg(long, default_value = "0.1,0.05,0.025")]
    pub eps: List<f64>,
    /// Number of marked blocks, when --pattern is not given.
    #[arg(long, default_value_t = 5)]
    pub t: usize,
    #[arg(long, default_value_t = 4.0)]
    pub tau_bar: f64,
    /// Relative deviations of the tau_i, summing to zero. Defaults to one
    /// block raised and the other t-1 lowered equally.
    #[arg(long)]
    pub pattern: Option<List<f64>>,
    /// Fail unless the inequality holds (theorem 2, beta < 1/4), the penalty
    /// is positive, and halving eps quarters it.
    #[arg(long)]
    pub assert: bool,
    /// Allowed relative deviation of the eps-halving penalty ratio from 4.
    #[arg(long, default_value_t = 0.25)]
    pub tol_halving: f64,
    /// Worker threads; output order does not depend on it.
    #[arg(long)]
    pub jobs: Option<usize>,
    #[command(flatten)]
    pub out: OutputArgs,
}

fn perturb_check(args: &PerturbCheckArgs) -> Result<()> {
    let pattern = match &args.pattern {
        Some(List(p)) => p.clone(),
        None if args.t >= 2 => PerturbedFamily::skewed_pattern(args.t),
        None => return Err(Error::InvalidInput("--t must be at least 2".into())),
    };
    let families = match args.theorem {
        Theorem::ManyBlocks => vec![PerturbedFamily::new(f64::INFINITY, args.tau_bar, pattern)?],
        Theorem::FiniteK => args
            .betas
            .0
            .iter()
            .map(|&beta| PerturbedFamily::with_beta(beta, args.tau_bar, pattern.clone()))
            .collect::<Result<Vec<_>>>()?,
    };
    let tasks: Vec<(usize, f64)> = (0..families.len())
        .flat_map(|f| args.eps.0.iter().map(move |&eps| (f, eps)))
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?;
    let rows: Vec<PerturbationReport> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(f, eps)| {
                let family = &families[f];
                match (args.theorem, args.assert) {
                    (Theorem::ManyBlocks, _) => theorem1_report(family, eps),
                    (Theorem::FiniteK, true) => theorem2_check(family, eps),
                    (Theorem::FiniteK, false) => theorem2_report(family, eps),
                }
            })
            .collect::<Result<Vec<_>>>()
    })?;
    args.out.write_rows(&rows)?;

    let problems = halving_violations(&rows, args.tol_halving);
    let nonpositive = rows
        .iter()
        .filter(|r| !r.degenerate && r.measured.is_finite() && r.measured <= 0.0)
        .count();
    if args.assert && (!problems.is_empty() || nonpositive > 0) {
        let mut msg = problems.join("; ");
        if nonpositive > 0 {
            if !msg.is_empty() {
                msg.push_str("; ");
            }
            msg.push_str(&format!("{nonpositive} rows with nonpositive penalty"));
        }
        return Err(Error::Assertion(msg));
    }
    for p in &problems {
        eprintln!("note: {p}");
    }
    Ok(())
}

/// Pairs of rows at the same beta with `eps_b = eps_a / 2` whose penalty
/// ratio is not within `tol` of 4.
fn halving_violations(rows: &[PerturbationReport], tol: f64) -> Vec<String> {
    let mut out = Vec::new();
    for a in rows {
        for b in rows {
            let paired =
                a.beta == b.beta && (b.eps_scale - 0.5 * a.eps_scale).abs() < 1e-12 * a.eps_scale;
            if !paired || a.degenerate || !(a.measured.is_finite() && b.measured.is_finite()) {
                continue;
            }
            let ratio = a.measured / b.measured;
            if ratio.is_nan() || (ratio / 4.0 - 1.0).abs() > tol {
                out.push(format!(
                    "beta = {}: penalty ratio {ratio} for eps {} -> {}",
                    a.beta, a.eps_scale, b.eps_scale
                ));
            }
        }
    }
    out
}

#[derive(Debug, Args)]
pub struct OracleCompareArgs {
    #[arg(long, default_value_t = 20)]
    pub instances: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Compare every j1, j2 in 0..=max_j.
    #[arg(long, default_value_t = 8)]
    pub max_j: u64,
    /// Largest N drawn.
    #[arg(long, default_value_t = 1 << 16)]
    pub max_n: u64,
    #[arg(long, default_value_t = 8)]
    pub k_min: u64,
    #[arg(long, default_value_t = 64)]
    pub k_max: u64,
    /// Largest allowed amplitude difference.
    #[arg(long, default_value_t = 1e-10)]
    pub tol_sim: f64,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Serialize)]
struct OracleRow {
    instance: usize,
    #[serde(rename = "K")]
    k: u64,
    b: u64,
    t: usize,
    #[serde(rename = "N")]
    n: u64,
    taus: String,
    max_abs_diff: f64,
    pass: bool,
}

fn oracle_compare(args: &OracleCompareArgs) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let drawn = (0..args.instances)
        .map(|_| {
            let problem = random_problem(&mut rng, args.k_min..=args.k_max, args.max_n)?;
            let layout_seed = rand::Rng::gen::<u64>(&mut rng);
            Ok((problem, layout_seed))
        })
        .collect::<Result<Vec<_>>>()?;
    let rows = drawn
        .par_iter()
        .enumerate()
        .map(|(i, (problem, layout_seed))| {
            let sim = FullSimulator::permuted(problem, args.max_n, *layout_seed)?;
            let diff = full_sim::compare_with_reduced(&sim, args.max_j)?;
            Ok(OracleRow {
                instance: i,
                k: problem.k(),
                b: problem.b(),
                t: problem.t(),
                n: problem.n(),
                taus: problem
                    .taus()
                    .iter()
                    .map(u64::to_string)
                    .collect::<Vec<_>>()
                    .join(";"),
                max_abs_diff: diff,
                pass: diff <= args.tol_sim,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    args.out.write_rows(&rows)?;
    let failed = rows.iter().filter(|r| !r.pass).count();
    if failed > 0 {
        return Err(Error::Assertion(format!(
            "{failed} of {} instances differ by more than {}",
            rows.len(),
            args.tol_sim
        )));
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub instance: InstanceArgs,
    /// Reject instances with t >= K/4.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Serialize)]
struct Derived {
    #[serde(rename = "N")]
    n: u64,
    #[serde(rename = "K")]
    k: u64,
    b: u64,
    t: usize,
    z: u64,
    taus: Vec<u64>,
    tau_bar: f64,
    tau_bar_exact: String,
    epsilons: Vec<String>,
    variance: f64,
    variance_exact: String,
    beta: f64,
    beta_exact: String,
    theta: f64,
    thetas: Vec<f64>,
    regime: crate::problem::Regime,
    n_is_power_of_two: bool,
}

fn validate(args: &ValidateArgs) -> Result<()> {
    let spec = args.instance.spec()?;
    let problem = if args.strict {
        make_problem(spec.k, spec.b, &spec.taus)?
    } else {
        make_problem_relaxed(spec.k, spec.b, &spec.taus)?
    };
    warn_if_not_power_of_two(&problem);
    let dist = problem.distribution();
    let angles = problem.angles();
    let derived = Derived {
        n: problem.n(),
        k: problem.k(),
        b: problem.b(),
        t: problem.t(),
        z: problem.z(),
        taus: problem.taus().to_vec(),
        tau_bar: rational_to_f64(dist.tau_bar()),
        tau_bar_exact: dist.tau_bar().to_string(),
        epsilons: dist.epsilons().iter().map(ToString::to_string).collect(),
        variance: rational_to_f64(dist.variance()),
        variance_exact: dist.variance().to_string(),
        beta: rational_to_f64(problem.beta()),
        beta_exact: problem.beta().to_string(),
        theta: angles.theta,
        thetas: angles.thetas,
        regime: problem.regime(),
        n_is_power_of_two: problem.geometry().is_power_of_two(),
    };
    let mut out = io::stdout().lock();
    write_json(&mut out, &derived)
}

/// Runs a parsed command.
pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Optimize(a) => optimize(a),
        Command::SweepBeta(a) => sweep_beta(a),
        Command::PerturbCheck(a) => perturb_check(a),
        Command::OracleCompare(a) => oracle_compare(a),
        Command::Validate(a) => validate(a),
    }
}

#[derive(Serialize)]
struct ErrorReport<'a> {
    error: &'a str,
    message: String,
}

/// Prints an error as one JSON object on stderr.
pub fn report_error(kind: &str, message: String) {
    let report = ErrorReport {
        error: kind,
        message,
    };
    eprintln!(
        "{}",
        serde_json::to_string(&report).expect("error report serializes")
    );
}

/// Parses `args`, runs the command, and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return 0;
        }
        Err(e) => {
            report_error("invalid_input", e.to_string().trim_end().to_string());
            return 2;
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            report_error(e.kind(), e.to_string());
            e.exit_code()
        }
    }
}
