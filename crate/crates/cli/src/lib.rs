//! Command-line front end: `simulate`, `asymptotics`, `verify` and `selftest`.
//!
//! Exit codes: 0 all checks pass, 1 a verification failed, 2 bad
//! configuration or arguments.

pub mod config;
pub mod report;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use crystalwalk::verify::{CheckRegistry, Tolerance, VerificationReport, VerifyConfig, VerifyContext, VerifyError};
use crystalwalk::walker::{SimulationMode, WalkError, Walker, TRAJECTORY_CAP};
use crystalwalk::{model_for, RngSpec, Sign, WalkRecord};
use thiserror::Error;

use config::{resolve_seed, ConfigError, Mode, RunConfig, SEED_ENV};
use report::{Report, Status};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Verify(#[from] VerifyError),
    #[error("{0}")]
    Walk(#[from] WalkError),
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Usage(String),
}

#[derive(Debug, Parser)]
#[command(name = "crystalwalk", version, about = "Random walks on the ice-1h and graphite-2h lattices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate one path.
    Simulate(SimulateArgs),
    /// Print every closed-form asymptotic quantity as JSON.
    Asymptotics {
        #[arg(long)]
        config: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a verification suite.
    Verify(VerifyArgs),
    /// Built-in symmetric and degenerate reference cases.
    Selftest,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Config file, or `builtin:NAME`.
    #[arg(long)]
    config: String,
    #[arg(long)]
    steps: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// CSV with columns step,x,y,z,i,j,k_sign.
    #[arg(long)]
    trajectory: Option<PathBuf>,
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Suite {
    Oracles,
    Ledger,
    Lln,
    Clt,
    All,
}

impl Suite {
    fn name(self) -> &'static str {
        match self {
            Suite::Oracles => "oracles",
            Suite::Ledger => "ledger",
            Suite::Lln => "lln",
            Suite::Clt => "clt",
            Suite::All => "all",
        }
    }
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(value_enum)]
    suite: Suite,
    #[arg(long)]
    config: String,
    #[arg(long)]
    steps: Option<u64>,
    #[arg(long)]
    replicates: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// `key=value`, e.g. `cov_rel=0.1`. Repeatable.
    #[arg(long = "tol", value_name = "KEY=VALUE")]
    tol: Vec<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    lln_steps: Option<u64>,
    #[arg(long)]
    ledger_paths: Option<u64>,
    /// Worker threads (default: available parallelism).
    #[arg(long)]
    threads: Option<usize>,
}

pub const DEFAULT_STEPS: u64 = 10_000;
/// Desk scale: enough replicates for the 2e-3 covariance floor.
pub const DEFAULT_REPLICATES: u64 = 100_000;

/// Parses `argv` (including the program name) and runs the command.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let env_seed = std::env::var(SEED_ENV).ok();
    match dispatch(cli.command, env_seed.as_deref()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_CONFIG
        }
    }
}

fn dispatch(cmd: Command, env_seed: Option<&str>) -> Result<i32, CliError> {
    match cmd {
        Command::Simulate(a) => simulate(a, env_seed),
        Command::Asymptotics { config, out } => {
            let cfg = RunConfig::load(&config)?;
            let table = cfg.table()?;
            let summary = model_for(table.kind).summary(&table).map_err(VerifyError::from)?;
            let text = pretty(&summary);
            emit(out.as_deref().or(cfg.output.summary.as_deref()), &text)?;
            Ok(EXIT_OK)
        }
        Command::Verify(a) => verify(a, env_seed),
        Command::Selftest => selftest(),
    }
}

fn pretty<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

/// Writes to `path`, or stdout when absent.
fn emit(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Write { path: p.to_path_buf(), source: e }),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .map_err(|e| CliError::Write { path: PathBuf::from("<stdout>"), source: e })
        }
    }
}

fn simulate(a: SimulateArgs, env_seed: Option<&str>) -> Result<i32, CliError> {
    let cfg = RunConfig::load(&a.config)?;
    let table = cfg.table()?;
    let steps = a.steps.or(cfg.steps).unwrap_or(DEFAULT_STEPS);
    let seed = resolve_seed(a.seed, cfg.seed, env_seed)?;
    let trajectory = a.trajectory.or(cfg.output.trajectory.clone());
    if cfg.mode == Mode::Trajectory && trajectory.is_none() {
        return Err(ConfigError::Invalid {
            key: "mode".into(),
            constraint: "trajectory mode needs --trajectory or output.trajectory".into(),
        }
        .into());
    }
    let mode = match trajectory {
        Some(_) => SimulationMode::Trajectory { cap: TRAJECTORY_CAP },
        None => SimulationMode::Summary,
    };
    let walker = Walker::new(&table).map_err(WalkError::from)?;
    let record = walker.simulate(steps, RngSpec::new(seed, 0), mode)?;
    if let Some(path) = &trajectory {
        write_trajectory(path, &record, &table)?;
    }
    emit(a.summary.as_deref().or(cfg.output.summary.as_deref()), &pretty(&record))?;
    Ok(EXIT_OK)
}

fn write_trajectory(path: &Path, record: &WalkRecord, table: &crystalwalk::kernels::TransitionTable) -> Result<(), CliError> {
    let wrap = |e| CliError::Write { path: path.to_path_buf(), source: e };
    let file = std::fs::File::create(path).map_err(wrap)?;
    let mut w = std::io::BufWriter::new(file);
    writeln!(w, "step,x,y,z,i,j,k_sign").map_err(wrap)?;
    let sign = |c: crystalwalk::VertexClass, s: Sign| c.sign(s).map(|v| v.to_string()).unwrap_or_default();
    for (t, st) in record.states.iter().flatten().enumerate() {
        let x = st.position(&table.geometry);
        writeln!(
            w,
            "{t},{},{},{},{},{},{}",
            x.x,
            x.y,
            x.z,
            sign(st.class, Sign::Color),
            sign(st.class, Sign::Jump),
            sign(st.class, Sign::Altitude)
        )
        .map_err(wrap)?;
    }
    w.flush().map_err(wrap)
}

fn verify(a: VerifyArgs, env_seed: Option<&str>) -> Result<i32, CliError> {
    let cfg = RunConfig::load(&a.config)?;
    let table = cfg.table()?;
    let mut vc = VerifyConfig::new(table);
    vc.steps = a.steps.or(cfg.steps).unwrap_or(DEFAULT_STEPS);
    vc.replicates = a.replicates.or(cfg.replicates).unwrap_or(DEFAULT_REPLICATES);
    vc.seed = resolve_seed(a.seed, cfg.seed, env_seed)?;
    if let Some(n) = a.lln_steps {
        vc.lln_steps = n;
    }
    if let Some(n) = a.ledger_paths {
        vc.ledger_paths = n;
    }
    vc.tolerance = parse_tolerances(&a.tol)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(a.threads.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Usage(format!("--threads: {e}")))?;

    let registry = CheckRegistry::builtin();
    let reports = pool.install(|| -> Result<Vec<VerificationReport>, CliError> {
        let ctx = VerifyContext::new(vc.clone())?;
        Ok(match a.suite {
            Suite::All => registry.run_all(&ctx)?,
            s => registry.run(s.name(), &ctx)?,
        })
    })?;

    let report = Report::new(a.suite.name(), &vc, reports);
    print_lines(&report);
    emit(a.out.as_deref().or(cfg.output.report.as_deref()), &pretty(&report))?;
    Ok(if report.totals.fail == 0 { EXIT_OK } else { EXIT_FAIL })
}

fn parse_tolerances(items: &[String]) -> Result<Tolerance, CliError> {
    let mut tol = Tolerance::default();
    for item in items {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--tol expects key=value, got `{item}`")))?;
        let value: f64 = v
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("--tol {k}: `{v}` is not a number")))?;
        tol.set(k.trim(), value)?;
    }
    Ok(tol)
}

fn print_lines(report: &Report) {
    let mut err = std::io::stderr().lock();
    for r in &report.reports {
        if r.status != Status::Pass {
            let _ = writeln!(
                err,
                "{:<8} {} observed={:e} target={:e} tol={:e} {}",
                format!("{:?}", r.status).to_lowercase(),
                r.check,
                r.observed,
                r.target,
                r.tolerance,
                r.detail
            );
        }
    }
    let t = &report.totals;
    let _ = writeln!(err, "{}: {} pass, {} flagged, {} fail", report.meta.check, t.pass, t.flagged, t.fail);
}

/// Short runs of every suite except the CLT on the builtin configs.
fn selftest() -> Result<i32, CliError> {
    let reports = report::selftest_reports()?;
    let mut failed = 0;
    for r in &reports {
        let status = format!("{:?}", r.status).to_lowercase();
        println!("{status:<8} {}", r.check);
        if r.status == Status::Fail {
            failed += 1;
            println!("         observed={:e} target={:e} tol={:e} {}", r.observed, r.target, r.tolerance, r.detail);
        }
    }
    println!("selftest: {} checks, {failed} failed", reports.len());
    Ok(if failed == 0 { EXIT_OK } else { EXIT_FAIL })
}
