//! The outer iterative scheme: build the Hamiltonian around the current
//! voltages, minimize it with a backend, move to the selected neighbour,
//! shrink the increments, repeat until the residual drops below epsilon.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{newton_raphson, residual, NewtonOptions, VoltageState};
use crate::grid::GridModel;
use crate::hamiltonian::{build_hamiltonian, increments, HamiltonianInstance, IncrementSchedule};
use crate::solvers::{solve_exhaustive, solve_qaoa, solve_sa, QaoaConfig, SaConfig, SolveOutcome};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Backend {
    Exhaustive,
    SimulatedAnnealing(SaConfig),
    Qaoa(QaoaConfig),
    /// Classical reference; bypasses the spin loop entirely.
    NewtonRaphson(NewtonOptions),
}

impl Backend {
    pub fn name(&self) -> &'static str {
        match self {
            Backend::Exhaustive => "exhaustive",
            Backend::SimulatedAnnealing(_) => "sa",
            Backend::Qaoa(_) => "qaoa",
            Backend::NewtonRaphson(_) => "nr",
        }
    }

    /// Backend with default settings by CLI name.
    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "exhaustive" => Backend::Exhaustive,
            "sa" => Backend::SimulatedAnnealing(SaConfig::default()),
            "qaoa" => Backend::Qaoa(QaoaConfig::default()),
            "nr" => Backend::NewtonRaphson(NewtonOptions::default()),
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub backend: Backend,
    pub epsilon: f64,
    /// Also bounds the number of iterations.
    pub schedule: IncrementSchedule,
    /// Warm start; flat start when `None`.
    pub initial: Option<VoltageState>,
    /// Per-iteration backend seeds are derived from this, replacing the
    /// seed stored in the backend config.
    pub seed: u64,
}

impl RunConfig {
    pub fn new(backend: Backend) -> Self {
        Self {
            backend,
            epsilon: 1e-3,
            schedule: IncrementSchedule::default(),
            initial: None,
            seed: 0,
        }
    }

    pub fn it_max(&self) -> usize {
        self.schedule.it_max
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::Config(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        self.schedule.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// Number of updates applied so far; the voltages below are the ones
    /// reached after update `it`.
    pub it: usize,
    pub residual: f64,
    pub mu: Vec<f64>,
    pub omega: Vec<f64>,
    /// Increments used to reach these voltages.
    pub dmu: f64,
    pub domega: f64,
    pub solver_energy: f64,
    pub solver_elapsed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub backend: String,
    pub converged: bool,
    pub iterations: Vec<IterationRecord>,
    pub final_voltage: VoltageState,
    pub total_elapsed: f64,
    pub initial_residual: f64,
    pub final_residual: f64,
    /// Lowest-residual voltages seen, including the start point.
    pub best_voltage: VoltageState,
    pub best_residual: f64,
}

impl RunResult {
    pub fn mean_iteration_time(&self) -> f64 {
        if self.iterations.is_empty() {
            0.0
        } else {
            self.iterations
                .iter()
                .map(|r| r.solver_elapsed)
                .sum::<f64>()
                / self.iterations.len() as f64
        }
    }
}

fn iteration_seed(seed: u64, it: usize) -> u64 {
    seed.wrapping_add((it as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn minimize(backend: &Backend, h: &HamiltonianInstance, seed: u64) -> Result<SolveOutcome> {
    match backend {
        Backend::Exhaustive => solve_exhaustive(&h.poly),
        Backend::SimulatedAnnealing(cfg) => solve_sa(&h.poly, &SaConfig { seed, ..*cfg }),
        Backend::Qaoa(cfg) => solve_qaoa(&h.poly, &QaoaConfig { seed, ..*cfg }),
        Backend::NewtonRaphson(_) => unreachable!("handled before the loop"),
    }
}

pub fn run_pf(grid: &GridModel, cfg: &RunConfig) -> Result<RunResult> {
    run_pf_observed(grid, cfg, |_, _, _| {})
}

/// [`run_pf`], calling `observe(it, hamiltonian, outcome)` after every
/// backend call (with `it` counted from 0).
pub fn run_pf_observed(
    grid: &GridModel,
    cfg: &RunConfig,
    mut observe: impl FnMut(usize, &HamiltonianInstance, &SolveOutcome),
) -> Result<RunResult> {
    cfg.validate()?;
    let start = Instant::now();
    let mut v = match &cfg.initial {
        Some(v0) => v0.clone(),
        None => VoltageState::flat(grid),
    };
    let mut res = residual(grid, &v)?;
    let initial_residual = res;

    if let Backend::NewtonRaphson(opts) = cfg.backend {
        return run_newton(grid, cfg, v, initial_residual, opts, start);
    }

    let mut best = (res, v.clone());
    let mut records = Vec::new();
    let (mut dmu, mut domega) = increments(0, &cfg.schedule)?;
    let mut it = 0;
    while res > cfg.epsilon && it < cfg.it_max() {
        let wrap = |e: Error| Error::Iteration {
            it,
            source: Box::new(e),
        };
        let h = build_hamiltonian(grid, &v, dmu, domega).map_err(wrap)?;
        let out = minimize(&cfg.backend, &h, iteration_seed(cfg.seed, it)).map_err(wrap)?;
        observe(it, &h, &out);

        v = h.voltages(&out.best)?;
        res = residual(grid, &v)?;
        log::debug!("it {it}: residual {res:e}, dmu {dmu:e}, domega {domega:e}");
        records.push(IterationRecord {
            it: it + 1,
            residual: res,
            mu: v.mu.clone(),
            omega: v.omega.clone(),
            dmu,
            domega,
            solver_energy: out.energy,
            solver_elapsed: out.elapsed,
        });
        if res < best.0 {
            best = (res, v.clone());
        }
        (dmu, domega) = increments(it, &cfg.schedule)?;
        it += 1;
    }

    let converged = res <= cfg.epsilon;
    log::info!(
        "{}: {} after {it} iterations, residual {res:e}",
        cfg.backend.name(),
        if converged { "converged" } else { "stopped" }
    );
    Ok(RunResult {
        backend: cfg.backend.name().into(),
        converged,
        iterations: records,
        final_voltage: v,
        total_elapsed: start.elapsed().as_secs_f64(),
        initial_residual,
        final_residual: res,
        best_voltage: best.1,
        best_residual: best.0,
    })
}

fn run_newton(
    grid: &GridModel,
    cfg: &RunConfig,
    v0: VoltageState,
    initial_residual: f64,
    opts: NewtonOptions,
    start: Instant,
) -> Result<RunResult> {
    let (history, converged) = match newton_raphson(grid, &v0, opts) {
        Ok(sol) => (sol.history, true),
        Err(Error::NrDiverged { last, .. }) => (vec![*last], false),
        Err(e) => return Err(e),
    };
    let elapsed = start.elapsed().as_secs_f64();
    let per_step = elapsed / history.len().max(1) as f64;
    let mut records = Vec::with_capacity(history.len());
    for (k, v) in history.into_iter().enumerate() {
        let r = residual(grid, &v)?;
        records.push(IterationRecord {
            it: k + 1,
            residual: r,
            mu: v.mu,
            omega: v.omega,
            dmu: 0.0,
            domega: 0.0,
            solver_energy: r,
            solver_elapsed: per_step,
        });
    }
    let final_voltage = match records.last() {
        Some(r) => VoltageState::new(r.mu.clone(), r.omega.clone())?,
        None => v0,
    };
    let final_residual = residual(grid, &final_voltage)?;
    let (best_residual, best_voltage) = if final_residual <= initial_residual {
        (final_residual, final_voltage.clone())
    } else {
        (
            initial_residual,
            cfg.initial
                .clone()
                .unwrap_or_else(|| VoltageState::flat(grid)),
        )
    };
    Ok(RunResult {
        backend: cfg.backend.name().into(),
        converged: converged && final_residual <= cfg.epsilon,
        iterations: records,
        final_voltage,
        total_elapsed: start.elapsed().as_secs_f64(),
        initial_residual,
        final_residual,
        best_voltage,
        best_residual,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceFormat {
    Csv,
    Json,
}

/// CSV with one row per iteration, or the whole result as JSON.
pub fn export_trace(result: &RunResult, format: TraceFormat) -> Result<String> {
    match format {
        TraceFormat::Json => {
            serde_json::to_string_pretty(result).map_err(|e| Error::Export(e.to_string()))
        }
        TraceFormat::Csv => {
            let n = result.final_voltage.len();
            let mut w = csv::Writer::from_writer(Vec::new());
            let mut header: Vec<String> = [
                "it",
                "residual",
                "dmu",
                "domega",
                "solver_energy",
                "solver_elapsed",
            ]
            .iter()
            .map(|s| s.to_string())
            .collect();
            header.extend((0..n).map(|i| format!("mu_{i}")));
            header.extend((0..n).map(|i| format!("omega_{i}")));
            let export = |e: csv::Error| Error::Export(e.to_string());
            w.write_record(&header).map_err(export)?;
            for r in &result.iterations {
                let mut row = vec![
                    r.it.to_string(),
                    r.residual.to_string(),
                    r.dmu.to_string(),
                    r.domega.to_string(),
                    r.solver_energy.to_string(),
                    r.solver_elapsed.to_string(),
                ];
                row.extend(r.mu.iter().chain(&r.omega).map(|x| x.to_string()));
                w.write_record(&row).map_err(export)?;
            }
            let bytes = w.into_inner().map_err(|e| Error::Export(e.to_string()))?;
            String::from_utf8(bytes).map_err(|e| Error::Export(e.to_string()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::grid::{load_grid, Bus};
    use crate::hamiltonian::apply_spins;
    use crate::poly::SpinAssignment;

    fn zero_demand() -> GridModel {
        let mut text = fixtures::FOUR_BUS_TOML.to_string();
        for key in ["p_dem", "q_dem", "shunt_b_half"] {
            text = text
                .lines()
                .map(|l| {
                    if l.trim_start().starts_with(key) {
                        format!("{key} = 0.0")
                    } else {
                        l.to_string()
                    }
                })
                .collect::<Vec<_>>()
                .join("\n");
        }
        let g = load_grid(&text).unwrap();
        assert!(g
            .buses()
            .iter()
            .all(|b: &Bus| b.p_net() == 0.0 && b.q_net() == 0.0));
        g
    }

    #[test]
    fn zero_demand_converges_immediately() {
        let grid = zero_demand();
        for backend in [
            Backend::Exhaustive,
            Backend::SimulatedAnnealing(SaConfig::default()),
            Backend::Qaoa(QaoaConfig::default()),
            Backend::NewtonRaphson(NewtonOptions::default()),
        ] {
            let res = run_pf(&grid, &RunConfig::new(backend)).unwrap();
            assert!(res.converged, "{}", backend.name());
            assert!(res.iterations.is_empty());
            assert_eq!(res.final_voltage, VoltageState::flat(&grid));
        }
    }

    fn short_sa_run(seed: u64, it_max: usize) -> RunResult {
        let cfg = RunConfig {
            schedule: IncrementSchedule::new(it_max),
            seed,
            ..RunConfig::new(Backend::SimulatedAnnealing(SaConfig {
                readouts: 50,
                ..SaConfig::default()
            }))
        };
        run_pf(&fixtures::four_bus(), &cfg).unwrap()
    }

    #[test]
    fn records_are_consistent() {
        let grid = fixtures::four_bus();
        let res = short_sa_run(3, 300);
        let mut prev = VoltageState::flat(&grid);
        for (k, r) in res.iterations.iter().enumerate() {
            assert_eq!(r.it, k + 1);
            let v = VoltageState::new(r.mu.clone(), r.omega.clone()).unwrap();
            assert_eq!(r.residual, residual(&grid, &v).unwrap());
            assert!((r.solver_energy - r.residual).abs() <= 1e-9 * (1.0 + r.residual));
            // each step moves every non-slack coordinate by exactly one increment
            for i in 1..4 {
                assert!(((v.mu[i] - prev.mu[i]).abs() - r.dmu).abs() < 1e-12);
                assert!(((v.omega[i] - prev.omega[i]).abs() - r.domega).abs() < 1e-12);
            }
            prev = v;
        }
        assert_eq!(res.final_voltage, prev);
        assert!(res.best_residual <= res.final_residual);
    }

    #[test]
    fn increments_follow_the_update_order() {
        let res = short_sa_run(1, 10);
        let sched = IncrementSchedule::new(10);
        let expected: Vec<(f64, f64)> = (0..res.iterations.len())
            .map(|k| increments(k.saturating_sub(1), &sched).unwrap())
            .collect();
        let got: Vec<(f64, f64)> = res.iterations.iter().map(|r| (r.dmu, r.domega)).collect();
        assert_eq!(got, expected);
        assert_eq!(res.iterations.len(), 10);
        assert!(!res.converged);
    }

    #[test]
    fn reproducible() {
        let a = short_sa_run(11, 20);
        let b = short_sa_run(11, 20);
        assert_eq!(a.iterations.len(), b.iterations.len());
        for (x, y) in a.iterations.iter().zip(&b.iterations) {
            assert_eq!((x.residual, &x.mu, &x.omega), (y.residual, &y.mu, &y.omega));
        }
    }

    #[test]
    fn exhaustive_step_is_best_neighbour() {
        let grid = fixtures::four_bus();
        let cfg = RunConfig {
            schedule: IncrementSchedule::new(30),
            ..RunConfig::new(Backend::Exhaustive)
        };
        let mut bases = Vec::new();
        let res = run_pf_observed(&grid, &cfg, |_, h, _| bases.push(h.clone())).unwrap();
        for (h, rec) in bases.iter().zip(&res.iterations).take(8) {
            let best = (0..256)
                .map(|b| {
                    let s = SpinAssignment::from_basis_index(b, 8);
                    residual(&grid, &apply_spins(&h.base, &s, h.dmu, h.domega).unwrap()).unwrap()
                })
                .fold(f64::INFINITY, f64::min);
            assert!((rec.residual - best).abs() <= 1e-9 * (1.0 + best));
        }
    }

    #[test]
    fn newton_backend_shape() {
        let grid = fixtures::four_bus();
        let res = run_pf(
            &grid,
            &RunConfig::new(Backend::NewtonRaphson(NewtonOptions::default())),
        )
        .unwrap();
        assert!(res.converged);
        assert!(!res.iterations.is_empty());
        assert_eq!(res.final_voltage.mu, res.iterations.last().unwrap().mu);
        assert!(res.final_residual <= 1e-10);
    }

    #[test]
    fn backend_errors_carry_iteration() {
        let grid = fixtures::four_bus();
        let bad = RunConfig::new(Backend::SimulatedAnnealing(SaConfig {
            readouts: 0,
            ..SaConfig::default()
        }));
        match run_pf(&grid, &bad) {
            Err(Error::Iteration { it: 0, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn invalid_config() {
        let grid = fixtures::two_bus();
        let cfg = RunConfig {
            epsilon: 0.0,
            ..RunConfig::new(Backend::Exhaustive)
        };
        assert!(run_pf(&grid, &cfg).is_err());
    }

    #[test]
    fn csv_shapes() {
        let grid = zero_demand();
        let empty = run_pf(&grid, &RunConfig::new(Backend::Exhaustive)).unwrap();
        let text = export_trace(&empty, TraceFormat::Csv).unwrap();
        assert_eq!(text.lines().count(), 1);
        assert_eq!(
            text.trim_end(),
            "it,residual,dmu,domega,solver_energy,solver_elapsed,\
             mu_0,mu_1,mu_2,mu_3,omega_0,omega_1,omega_2,omega_3"
        );

        let one = short_sa_run(0, 1);
        assert_eq!(one.iterations.len(), 1);
        let text = export_trace(&one, TraceFormat::Csv).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0].split(',').count(), lines[1].split(',').count());
    }

    #[test]
    fn csv_final_row_matches_final_voltage() {
        let res = short_sa_run(5, 300);
        let text = export_trace(&res, TraceFormat::Csv).unwrap();
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let last = rdr.records().last().unwrap().unwrap();
        let values: Vec<f64> = last.iter().skip(6).map(|x| x.parse().unwrap()).collect();
        assert_eq!(&values[..4], res.final_voltage.mu.as_slice());
        assert_eq!(&values[4..], res.final_voltage.omega.as_slice());
    }

    #[test]
    fn json_round_trip() {
        let res = short_sa_run(2, 5);
        let text = export_trace(&res, TraceFormat::Json).unwrap();
        let back: RunResult = serde_json::from_str(&text).unwrap();
        assert_eq!(back, res);
        assert!(text.find("\"converged\"").unwrap() < text.find("\"iterations\"").unwrap());
    }
}
