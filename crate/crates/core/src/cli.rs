//! Command-line front end.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::coalition::SelectStrategy;
use crate::engine::{self, EngineConfig, SplitStrategy, StopCriteria};
use crate::error::{Error, Result};
use crate::formats::{parse_matrix, to_json_string, write_trace, ConfigEcho, RunResult};
use crate::network::Network;
use crate::oracle;
use crate::propagate::Propagation;
use crate::valuefn::{AttributionProblem, Groups, ValueKind};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ENGINE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "shapley-bounds",
    version,
    about = "Provable bounds on exact Shapley values of feedforward networks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Anytime bounds until a stop criterion fires.
    Bounds(EngineArgs),
    /// Run the search until every branch is resolved.
    Exact(EngineArgs),
    /// Brute-force enumeration of every coalition (at most 20 features).
    Oracle(ProblemArgs),
    /// Check that the exact values lie inside the engine's bounds.
    Check(EngineArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ValueFnArg {
    Marginal,
    Baseline,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SelectArg {
    MaxDiam,
    MinDiam,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    InOrder,
    Smears,
    Strong,
    SmartIbp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PropArg {
    Ibp,
    Lbp,
}

#[derive(Debug, Clone, Args)]
pub struct ProblemArgs {
    /// Network JSON document.
    #[arg(long)]
    pub network: PathBuf,
    /// CSV holding the explicand as a single row.
    #[arg(long)]
    pub instance: PathBuf,
    /// CSV of background rows.
    #[arg(long)]
    pub background: PathBuf,
    /// JSON array of arrays of 1-based input indices.
    #[arg(long)]
    pub groups: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "marginal")]
    pub value_fn: ValueFnArg,
    /// 1-based output index.
    #[arg(long, default_value_t = 1)]
    pub target_output: usize,
    /// Result JSON path; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct EngineArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Stop once every feature's gap is at most this.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Stop once every half-range is at most this percentage of |f(x)|.
    #[arg(long)]
    pub hr_percent: Option<f64>,
    /// Wall-clock limit in seconds.
    #[arg(long)]
    pub timeout: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<u64>,
    #[arg(long, default_value_t = 64)]
    pub batch: usize,
    #[arg(long, value_enum, default_value = "max-diam")]
    pub select: SelectArg,
    #[arg(long, value_enum, default_value = "smears")]
    pub split: SplitArg,
    #[arg(long, value_enum, default_value = "lbp")]
    pub prop: PropArg,
    /// Per-iteration trace CSV.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Include per-feature bounds in the trace.
    #[arg(long)]
    pub trace_features: bool,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io(_) => EXIT_IO,
        Error::Problem(_) | Error::TooManyFeatures { .. } | Error::Config(_) => EXIT_USAGE,
        _ => EXIT_ENGINE,
    }
}

pub fn execute(command: &Command) -> Result<i32> {
    match command {
        Command::Bounds(args) => cmd_bounds(args),
        Command::Exact(args) => cmd_exact(args),
        Command::Oracle(args) => cmd_oracle(args),
        Command::Check(args) => cmd_check(args),
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn read_rows(path: &Path) -> Result<Vec<Vec<f64>>> {
    parse_matrix(&read_text(path)?)
}

pub fn load_problem(args: &ProblemArgs) -> Result<AttributionProblem> {
    let net = Network::from_json(&read_text(&args.network)?)?;
    let mut instance = read_rows(&args.instance)?;
    if instance.len() != 1 {
        return Err(Error::Problem(format!(
            "instance file must hold exactly one row, found {}",
            instance.len()
        )));
    }
    let explicand = instance.remove(0);
    let background = read_rows(&args.background)?;
    let groups = match &args.groups {
        Some(path) => Some(Groups::from_json(&read_text(path)?, net.input_dim())?),
        None => None,
    };
    if args.target_output == 0 {
        return Err(Error::Problem("target output is 1-based".into()));
    }
    let kind = match args.value_fn {
        ValueFnArg::Marginal => ValueKind::Marginal,
        ValueFnArg::Baseline => ValueKind::Baseline,
    };
    AttributionProblem::new(net, explicand, background, kind, args.target_output - 1, groups)
}

fn engine_config(args: &EngineArgs) -> EngineConfig {
    EngineConfig {
        batch_size: args.batch,
        select: match args.select {
            SelectArg::MaxDiam => SelectStrategy::MaxDiam,
            SelectArg::MinDiam => SelectStrategy::MinDiam,
        },
        split: match args.split {
            SplitArg::InOrder => SplitStrategy::InOrder,
            SplitArg::Smears => SplitStrategy::Smears,
            SplitArg::Strong => SplitStrategy::StrongBranching,
            SplitArg::SmartIbp => SplitStrategy::SmartBranchingIbp,
        },
        propagation: match args.prop {
            PropArg::Ibp => Propagation::Ibp,
            PropArg::Lbp => Propagation::Lbp,
        },
        stop: StopCriteria {
            delta: args.delta,
            hr_fraction: args.hr_percent.map(|p| p / 100.0),
            timeout: args.timeout.map(Duration::from_secs_f64),
            max_iterations: args.max_iter,
        },
        ..EngineConfig::default()
    }
}

fn emit<T: Serialize>(out: Option<&Path>, value: &T) -> Result<()> {
    let mut text = to_json_string(value);
    text.push('\n');
    match out {
        Some(path) => fs::write(path, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn run_engine(args: &EngineArgs, config: EngineConfig) -> Result<i32> {
    let problem = load_problem(&args.problem)?;
    let started = Instant::now();
    let out = engine::run(&problem, config.clone())?;
    let wall = started.elapsed().as_secs_f64();
    if let Some(path) = &args.trace {
        write_trace(fs::File::create(path)?, &out.trace, args.trace_features)?;
    }
    let echo = ConfigEcho::new(&config, problem.kind().as_str(), args.problem.target_output);
    emit(
        args.problem.out.as_deref(),
        &RunResult::new(&out.bounds, out.status, wall, echo),
    )?;
    Ok(EXIT_OK)
}

pub fn cmd_bounds(args: &EngineArgs) -> Result<i32> {
    let config = engine_config(args);
    config.validate()?;
    run_engine(args, config)
}

pub fn cmd_exact(args: &EngineArgs) -> Result<i32> {
    let mut config = engine_config(args);
    config.stop.delta = Some(0.0);
    config.stop.hr_fraction = None;
    run_engine(args, config)
}

#[derive(Serialize)]
struct OracleOutput {
    phi: Vec<f64>,
    coalitions_evaluated: u64,
    wall_seconds: f64,
}

pub fn cmd_oracle(args: &ProblemArgs) -> Result<i32> {
    let problem = load_problem(args)?;
    let started = Instant::now();
    let exact = oracle::exact_shap(&problem)?;
    emit(
        args.out.as_deref(),
        &OracleOutput {
            phi: exact.phi,
            coalitions_evaluated: exact.coalitions_evaluated,
            wall_seconds: started.elapsed().as_secs_f64(),
        },
    )?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct CheckFeature {
    index: usize,
    exact: f64,
    lb: f64,
    ub: f64,
}

#[derive(Serialize)]
struct CheckOutput {
    contained: bool,
    max_abs_gap_violation: f64,
    max_abs_error: f64,
    status: String,
    iterations: u64,
    features: Vec<CheckFeature>,
    wall_seconds: f64,
    config: ConfigEcho,
}

pub fn cmd_check(args: &EngineArgs) -> Result<i32> {
    let problem = load_problem(&args.problem)?;
    let mut config = engine_config(args);
    if config.stop == StopCriteria::default() {
        config.stop = StopCriteria::exhaustive();
    }
    let started = Instant::now();
    let (report, bounds, status) = oracle::check_engine(&problem, config.clone())?;
    let features = report
        .exact
        .iter()
        .enumerate()
        .map(|(i, &exact)| CheckFeature {
            index: i + 1,
            exact,
            lb: bounds.lb_phi[i],
            ub: bounds.ub_phi[i],
        })
        .collect();
    let output = CheckOutput {
        contained: report.contained,
        max_abs_gap_violation: report.max_abs_gap_violation,
        max_abs_error: report.max_abs_error,
        status: status.as_str().to_string(),
        iterations: bounds.iteration,
        features,
        wall_seconds: started.elapsed().as_secs_f64(),
        config: ConfigEcho::new(&config, problem.kind().as_str(), args.problem.target_output),
    };
    emit(args.problem.out.as_deref(), &output)?;
    Ok(if report.contained { EXIT_OK } else { EXIT_ENGINE })
}
