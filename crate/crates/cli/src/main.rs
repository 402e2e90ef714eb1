//! `pf`: run the iterative Ising power flow from the command line.
//!
//! Exit codes: 0 converged, 2 ran to completion without converging, 1 error.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use isingpf::flow::NewtonOptions;
use isingpf::{
    build_hamiltonian, export_trace, increments, load_grid, run_pf, Backend, GridModel,
    IncrementSchedule, RunConfig, RunResult, TraceFormat, VoltageState,
};

#[derive(Parser)]
#[command(
    name = "pf",
    version,
    about = "AC power flow as iterated spin-glass minimization"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(clap::Args)]
struct LoopArgs {
    /// Convergence threshold on the squared mismatch.
    #[arg(long, default_value_t = 1e-3)]
    epsilon: f64,
    #[arg(long, default_value_t = 300)]
    it_max: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one grid with one backend.
    Run {
        #[arg(long)]
        grid: PathBuf,
        /// exhaustive, sa, qaoa or nr
        #[arg(long, default_value = "sa")]
        backend: String,
        #[command(flatten)]
        opts: LoopArgs,
        /// Write the per-iteration trace here.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Run several backends and compare them against Newton-Raphson.
    Compare {
        #[arg(long)]
        grid: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "sa,qaoa,nr")]
        backends: Vec<String>,
        #[command(flatten)]
        opts: LoopArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the quadratized first-iteration Hamiltonian as QUBO text.
    Qubo {
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        penalty: Option<f64>,
    },
}

fn read_grid(path: &PathBuf) -> anyhow::Result<GridModel> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    load_grid(&text).with_context(|| format!("parsing {}", path.display()))
}

fn run_config(backend: &str, opts: &LoopArgs) -> anyhow::Result<RunConfig> {
    let Some(backend) = Backend::from_name(backend) else {
        bail!("unknown backend {backend:?}; expected exhaustive, sa, qaoa or nr");
    };
    Ok(RunConfig {
        epsilon: opts.epsilon,
        schedule: IncrementSchedule::new(opts.it_max),
        seed: opts.seed,
        ..RunConfig::new(backend)
    })
}

fn print_voltages(v: &VoltageState) {
    for i in 0..v.len() {
        println!("  bus {i}: mu = {:.6}, omega = {:.6}", v.mu[i], v.omega[i]);
    }
}

#[derive(Serialize)]
struct CompareRow {
    backend: String,
    converged: bool,
    iterations: usize,
    mean_iteration_time: f64,
    total_elapsed: f64,
    final_residual: f64,
    mu: Vec<f64>,
    omega: Vec<f64>,
    /// Largest componentwise |dV| against Newton-Raphson.
    max_deviation_vs_nr: Option<f64>,
}

#[derive(Serialize)]
struct CompareReport {
    epsilon: f64,
    it_max: usize,
    seed: u64,
    reference: Option<VoltageState>,
    runs: Vec<CompareRow>,
}

fn compare(
    grid: &GridModel,
    backends: &[String],
    opts: &LoopArgs,
) -> anyhow::Result<CompareReport> {
    let reference =
        match isingpf::newton_raphson(grid, &VoltageState::flat(grid), NewtonOptions::default()) {
            Ok(sol) => Some(sol.voltage),
            Err(e) => {
                log::warn!("no Newton-Raphson reference: {e}");
                None
            }
        };
    let mut runs = Vec::new();
    for name in backends {
        let cfg = run_config(name, opts)?;
        let res: RunResult = run_pf(grid, &cfg).with_context(|| format!("backend {name}"))?;
        let dev = reference.as_ref().map(|r| {
            r.mu.iter()
                .zip(&res.final_voltage.mu)
                .chain(r.omega.iter().zip(&res.final_voltage.omega))
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        });
        runs.push(CompareRow {
            backend: res.backend.clone(),
            converged: res.converged,
            iterations: res.iterations.len(),
            mean_iteration_time: res.mean_iteration_time(),
            total_elapsed: res.total_elapsed,
            final_residual: res.final_residual,
            mu: res.final_voltage.mu.clone(),
            omega: res.final_voltage.omega.clone(),
            max_deviation_vs_nr: dev,
        });
    }
    Ok(CompareReport {
        epsilon: opts.epsilon,
        it_max: opts.it_max,
        seed: opts.seed,
        reference,
        runs,
    })
}

fn execute(cli: Cli) -> anyhow::Result<bool> {
    match cli.command {
        Command::Run {
            grid,
            backend,
            opts,
            trace,
            format,
        } => {
            let grid = read_grid(&grid)?;
            let cfg = run_config(&backend, &opts)?;
            let res = run_pf(&grid, &cfg)?;
            println!(
                "{}: {} after {} iterations, residual {:.3e}, {:.3} s",
                res.backend,
                if res.converged {
                    "converged"
                } else {
                    "not converged"
                },
                res.iterations.len(),
                res.final_residual,
                res.total_elapsed
            );
            print_voltages(&res.final_voltage);
            if let Some(path) = trace {
                let format = match format {
                    Format::Csv => TraceFormat::Csv,
                    Format::Json => TraceFormat::Json,
                };
                fs::write(&path, export_trace(&res, format)?)
                    .with_context(|| format!("writing {}", path.display()))?;
            }
            Ok(res.converged)
        }
        Command::Compare {
            grid,
            backends,
            opts,
            out,
        } => {
            let grid = read_grid(&grid)?;
            let report = compare(&grid, &backends, &opts)?;
            println!(
                "{:<11} {:>9} {:>6} {:>12} {:>11} {:>10}",
                "backend", "converged", "iters", "s/iteration", "residual", "max |dV|"
            );
            for r in &report.runs {
                println!(
                    "{:<11} {:>9} {:>6} {:>12.4e} {:>11.3e} {:>10}",
                    r.backend,
                    r.converged,
                    r.iterations,
                    r.mean_iteration_time,
                    r.final_residual,
                    r.max_deviation_vs_nr
                        .map_or("-".into(), |d| format!("{d:.2e}"))
                );
            }
            if let Some(path) = out {
                fs::write(&path, serde_json::to_string_pretty(&report)?)
                    .with_context(|| format!("writing {}", path.display()))?;
            }
            Ok(report.runs.iter().all(|r| r.converged))
        }
        Command::Qubo { grid, penalty } => {
            let grid = read_grid(&grid)?;
            let (dmu, domega) = increments(0, &IncrementSchedule::default())?;
            let h = build_hamiltonian(&grid, &VoltageState::flat(&grid), dmu, domega)?;
            print!("{}", h.to_qubo(penalty)?.to_text());
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("PF_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
