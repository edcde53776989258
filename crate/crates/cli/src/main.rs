use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use spinboson::measure::TailModel;

use sbnm::commands::{format_limit, format_summary, limit, measure, simulate, sweep, sweep_meta, tail_from_meta};
use sbnm::config::{merge_sources, parse_list};
use sbnm::csv_io::{read_trajectory, write_distance, write_sweep, write_trajectory};
use sbnm::{parse_config, CliError, ConfigValues, Result, Solver, SweepSpec};

#[derive(Parser)]
#[command(name = "sbnm", version, about = "Non-Markovianity of the spin-boson model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Propagate the spin from |up> and write the trajectory CSV.
    Simulate(RunArgs),
    /// Trace distance and backflow measure of a trajectory CSV.
    Measure(MeasureArgs),
    /// Measure over a grid of couplings and cutoffs.
    Sweep(SweepArgs),
    /// Evaluate the weak-coupling limit of the measure.
    Limit(LimitArgs),
}

#[derive(Args)]
struct RunArgs {
    /// `key = value` configuration file; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = parse_solver)]
    solver: Option<Solver>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long = "omega-c")]
    omega_c: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long = "t-max")]
    t_max: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    /// Number of bath modes (exact solver).
    #[arg(long)]
    modes: Option<usize>,
    /// Bath discretization cutoff (exact solver).
    #[arg(long = "omega-max")]
    omega_max: Option<f64>,
    /// Maximum number of bath excitations (exact solver).
    #[arg(long = "n-exc")]
    n_exc: Option<usize>,
    /// Krylov subspace dimension (exact solver).
    #[arg(long = "krylov-dim")]
    krylov_dim: Option<usize>,
    /// Backflow threshold on the time derivative of the trace distance.
    #[arg(long)]
    eps: Option<f64>,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_solver(s: &str) -> std::result::Result<Solver, String> {
    s.parse()
}

impl RunArgs {
    fn values(&self) -> ConfigValues {
        ConfigValues {
            solver: self.solver,
            alpha: self.alpha,
            omega_c: self.omega_c,
            delta: self.delta,
            t_max: self.t_max,
            dt: self.dt,
            n_modes: self.modes,
            omega_max: self.omega_max,
            n_exc: self.n_exc,
            krylov_dim: self.krylov_dim,
            eps_sigma: self.eps,
            out: self.out.clone(),
            alphas: None,
            omega_cs: None,
        }
    }
}

#[derive(Args)]
struct MeasureArgs {
    /// Trajectory CSV of the |up> initial state.
    input: PathBuf,
    /// Tunneling amplitude; read from the file metadata when absent, else 1.
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long, default_value_t = spinboson::measure::DEFAULT_EPS_SIGMA)]
    eps: f64,
    /// Damping rate of the geometric tail beyond the horizon.
    #[arg(long = "tail-gamma")]
    tail_gamma: Option<f64>,
    /// Oscillation frequency of the tail model; one period lasts pi/frequency.
    #[arg(long = "tail-frequency")]
    tail_frequency: Option<f64>,
    /// Distance CSV output; the summary always goes to standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Comma-separated couplings.
    #[arg(long)]
    alphas: Option<String>,
    /// Comma-separated cutoff frequencies.
    #[arg(long = "omega-cs")]
    omega_cs: Option<String>,
    /// Number of sweep points run concurrently.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args)]
struct LimitArgs {
    #[arg(long = "omega-c")]
    omega_c: f64,
    #[arg(long, default_value_t = 1.0)]
    delta: f64,
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| CliError::io(p, e))?)),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn output_error(path: Option<&Path>) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::io(path.unwrap_or(Path::new("<stdout>")), e)
}

fn run_simulate(args: &RunArgs) -> Result<()> {
    let (cfg, warnings) = parse_config(args.config.as_deref(), args.values())?;
    warnings.iter().for_each(|w| eprintln!("warning: {w}"));
    let traj = simulate(&cfg)?;
    let out = cfg.out.as_deref();
    write_trajectory(open_output(out)?, &traj).map_err(output_error(out))
}

fn run_measure(args: &MeasureArgs) -> Result<()> {
    let traj = read_trajectory(&args.input)?;
    let delta = match args.delta {
        Some(d) => d,
        None => traj.meta.get("delta").and_then(|d| d.parse().ok()).unwrap_or(1.0),
    };
    let from_meta = tail_from_meta(&traj.meta);
    let tail = match (args.tail_gamma, args.tail_frequency) {
        (Some(gamma), Some(frequency)) => Some(TailModel { gamma, frequency }),
        (Some(gamma), None) => match from_meta {
            Some(m) => Some(TailModel { gamma, ..m }),
            None => {
                return Err(CliError::Config(
                    "--tail-gamma needs --tail-frequency for trajectories without analytic metadata".into(),
                ))
            }
        },
        (None, Some(_)) => return Err(CliError::Config("--tail-frequency needs --tail-gamma".into())),
        (None, None) => from_meta,
    };
    let m = measure(&traj, delta, args.eps, tail)?;
    if let Some(path) = args.out.as_deref() {
        write_distance(open_output(Some(path))?, &m.distance, &traj.meta).map_err(output_error(Some(path)))?;
    }
    print!("{}", format_summary(&m.report));
    Ok(())
}

fn run_sweep(args: &SweepArgs) -> Result<()> {
    let mut flags = args.run.values();
    let list = |key: &str, v: &Option<String>| -> Result<Option<Vec<f64>>> {
        v.as_deref().map(|s| parse_list(key, s)).transpose().map_err(CliError::Config)
    };
    flags.alphas = list("alphas", &args.alphas)?;
    flags.omega_cs = list("omega_cs", &args.omega_cs)?;
    let values = merge_sources(args.run.config.as_deref(), flags)?;
    let out = values.out.clone();
    let spec = SweepSpec::from_values(values)?;
    let rows = sweep(&spec, args.jobs)?;
    for row in &rows {
        if let Err(message) = &row.outcome {
            eprintln!("warning: point alpha = {}, omega_c = {} failed: {message}", row.alpha, row.omega_c);
        }
    }
    write_sweep(open_output(out.as_deref())?, &sweep_meta(&spec), &rows).map_err(output_error(out.as_deref()))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(args) => run_simulate(&args),
        Command::Measure(args) => run_measure(&args),
        Command::Sweep(args) => run_sweep(&args),
        Command::Limit(args) => {
            print!("{}", format_limit(&limit(args.omega_c, args.delta)?));
            Ok(())
        }
    }
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
