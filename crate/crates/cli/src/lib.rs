//! Command-line front end: inverse dynamics, simulation, benchmarking and invariant checks.

pub mod check;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use nalgebra::Vector3;

use pkmdyn::bench::run_bench;
use pkmdyn::dynamics::{reference_guess, ParallelSolver};
use pkmdyn::models::{load_pkm, ModelFile};
use pkmdyn::pkm::Pkm;
use pkmdyn::simulation::{initial_state, simulate, write_simulation_csv, TorqueSource};
use pkmdyn::trajectory::{run_inverse_dynamics, write_invdyn_csv, Trajectory};
use pkmdyn::Error;

/// Environment variable overriding the worker count.
pub const THREADS_ENV: &str = "PKMDYN_THREADS";

#[derive(Parser, Debug)]
#[command(name = "pkmdyn", version, about = "Kinematics and dynamics of parallel kinematic machines")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Inverse dynamics along a trajectory, one CSV row per sample
    Invdyn(InvdynArgs),
    /// Forward-dynamics simulation (RK4 with re-projection), CSV state history
    Simulate(SimulateArgs),
    /// Serial versus per-limb parallel timing report
    Bench(BenchArgs),
    /// Invariant checks at sampled configurations
    Check(CheckArgs),
}

#[derive(Args, Debug)]
pub struct TrajArgs {
    /// Trajectory: CSV file (t, x.., xd.., xdd..) or sin[:amp=a,b,c][:period=T][:origin=x,y,z]
    #[arg(long, default_value = "sin")]
    pub traj: String,
}

#[derive(Args, Debug)]
pub struct InvdynArgs {
    /// JSON model file
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub traj: TrajArgs,
    /// Sampling step of analytic trajectories (s)
    #[arg(long)]
    pub dt: Option<f64>,
    /// Duration of analytic trajectories (s), default one period
    #[arg(long)]
    pub duration: Option<f64>,
    /// Per-limb parallel evaluation with N workers (default L+1)
    #[arg(long, value_name = "N", num_args = 0..=1, require_equals = true, default_missing_value = "0")]
    pub parallel: Option<usize>,
    /// Output file (default stdout)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Trajectory giving the initial state and, without --torques, the replayed inverse-dynamics forces
    #[command(flatten)]
    pub traj: TrajArgs,
    /// Actuator force table (CSV with t and u0.. columns, e.g. invdyn output) or `zero`
    #[arg(long)]
    pub torques: Option<String>,
    /// Integration step (s)
    #[arg(long, default_value_t = 1e-4)]
    pub dt: f64,
    /// Simulated time (s)
    #[arg(long, default_value_t = 1.0)]
    pub duration: f64,
    /// Record every k-th step
    #[arg(long, default_value_t = 100)]
    pub record_every: usize,
    /// Switch gravity off
    #[arg(long)]
    pub no_gravity: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub traj: TrajArgs,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub duration: Option<f64>,
    /// Evaluations per row
    #[arg(long, default_value_t = 100_000)]
    pub evals: usize,
    /// Parallel width (default L+1)
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Args, Debug)]
pub struct CheckArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Seed of the random configurations
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Number of random configurations
    #[arg(long, default_value_t = 20)]
    pub samples: usize,
    /// Half-width of the sampled box around the reference point (chart units)
    #[arg(long, default_value_t = 0.02)]
    pub amplitude: f64,
}

/// Command failure with its process exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure { code: e.exit_code(), message: e.to_string() }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure { code: 2, message: e.to_string() }
    }
}

/// Worker count from `--parallel[=N]` (0 means L+1) and the environment override.
pub fn parallel_width(flag: Option<usize>) -> Result<Option<usize>, Failure> {
    let env = std::env::var(THREADS_ENV).ok();
    width_from(flag, env.as_deref())
}

fn width_from(flag: Option<usize>, env: Option<&str>) -> Result<Option<usize>, Failure> {
    let env = match env.map(str::trim).filter(|s| !s.is_empty()) {
        Some(s) => Some(s.parse::<usize>().map_err(|e| Failure {
            code: 2,
            message: format!("{THREADS_ENV}='{s}' is not a thread count: {e}"),
        })?),
        None => None,
    };
    Ok(match (flag, env) {
        (None, _) => None,
        (Some(_), Some(n)) if n > 0 => Some(n),
        (Some(0), _) => Some(0),
        (Some(n), _) => Some(n),
    })
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|source| Error::Io { path: p.clone(), source })?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn trajectory(pkm: &Pkm, spec: &str, dt: Option<f64>, duration: Option<f64>) -> Result<Trajectory, Failure> {
    Ok(Trajectory::parse(spec, &pkm.reference_x(), dt, duration)?)
}

pub fn cmd_invdyn(a: &InvdynArgs) -> Result<(), Failure> {
    let pkm = load_pkm(&a.model)?;
    let traj = trajectory(&pkm, &a.traj.traj, a.dt, a.duration)?;
    let solver = match parallel_width(a.parallel)? {
        Some(w) => Some(ParallelSolver::new(&pkm, (w > 0).then_some(w))?),
        None => None,
    };
    let rows = run_inverse_dynamics(&pkm, &traj.points(), &reference_guess(&pkm), solver.as_ref())?;
    let mut out = output(&a.out)?;
    write_invdyn_csv(&pkm, &rows, &mut out)?;
    out.flush()?;
    Ok(())
}

pub fn cmd_simulate(a: &SimulateArgs) -> Result<(), Failure> {
    let mut pkm = load_pkm(&a.model)?;
    if a.no_gravity {
        pkm = pkm.with_gravity(Vector3::zeros());
    }
    let traj = trajectory(&pkm, &a.traj.traj, None, None)?;
    let st = initial_state(&pkm, &traj)?;
    let mut source = match a.torques.as_deref() {
        None => TorqueSource::replay(&pkm, traj)?,
        Some("zero") => TorqueSource::Table { t: vec![0.0], u: vec![nalgebra::DVector::zeros(pkm.n_act())] },
        Some(p) => TorqueSource::load_csv(Path::new(p), pkm.n_act())?,
    };
    let report = simulate(&pkm, st, &mut source, a.dt, a.duration, a.record_every)?;
    let mut out = output(&a.out)?;
    write_simulation_csv(&pkm, &report.rows, &mut out)?;
    out.flush()?;
    eprintln!("max loop residual {:.3e}", report.max_residual);
    if let Some(e) = report.max_tracking {
        eprintln!("max tracking error {e:.3e}");
    }
    Ok(())
}

pub fn cmd_bench(a: &BenchArgs) -> Result<(), Failure> {
    let pkm = load_pkm(&a.model)?;
    let traj = trajectory(&pkm, &a.traj.traj, a.dt, a.duration)?;
    let width = width_from(Some(a.threads.unwrap_or(0)), std::env::var(THREADS_ENV).ok().as_deref())?;
    let report = run_bench(&pkm, &traj.points(), a.evals, width.filter(|&w| w > 0))?;
    print!("{report}");
    Ok(())
}

pub fn cmd_check(a: &CheckArgs) -> Result<(), Failure> {
    let file = ModelFile::load(&a.model)
        .and_then(|f| f.compile().map(|p| (f, p)))
        .map_err(|e| {
            println!("FAIL model-validation: {e}");
            Failure::from(e)
        })?;
    println!("PASS model-validation: {} loaded", a.model.display());
    let opts = check::CheckOptions { seed: a.seed, samples: a.samples, amplitude: a.amplitude };
    let results = check::run_checks(&file.0, &file.1, &opts);
    let mut failed = 0;
    for r in &results {
        println!("{r}");
        failed += usize::from(r.status == check::Status::Fail);
    }
    if failed > 0 {
        return Err(Failure { code: 1, message: format!("{failed} check(s) failed") });
    }
    Ok(())
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let res = match &cli.command {
        Command::Invdyn(a) => cmd_invdyn(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Check(a) => cmd_check(a),
    };
    match res {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn width_resolution() {
        assert_eq!(width_from(None, Some("4")).unwrap(), None);
        assert_eq!(width_from(Some(0), None).unwrap(), Some(0));
        assert_eq!(width_from(Some(2), None).unwrap(), Some(2));
        assert_eq!(width_from(Some(2), Some("3")).unwrap(), Some(3));
        assert_eq!(width_from(Some(2), Some("")).unwrap(), Some(2));
        assert!(width_from(Some(2), Some("x")).is_err());
    }

    #[test]
    fn parallel_flag_forms() {
        let p = |args: &[&str]| match Cli::try_parse_from(args).unwrap().command {
            Command::Invdyn(a) => a.parallel,
            _ => unreachable!(),
        };
        assert_eq!(p(&["pkmdyn", "invdyn", "--model", "m.json"]), None);
        assert_eq!(p(&["pkmdyn", "invdyn", "--model", "m.json", "--parallel"]), Some(0));
        assert_eq!(p(&["pkmdyn", "invdyn", "--model", "m.json", "--parallel=3"]), Some(3));
    }
}
