//! AC power flow solved as a sequence of spin-glass minimizations.
//!
//! Every non-slack bus voltage `mu_i + j omega_i` is moved by `±dmu` and
//! `±domega` per iteration, the sign chosen by one spin each. The sum of
//! squared power mismatches then becomes a quartic polynomial over the
//! spins which any of the [`solvers`] can minimize. The increments shrink
//! geometrically so the search refines from coarse to fine.
//!
//! Module map:
//! - [`grid`]: grid data, file format, admittance matrix
//! - [`flow`]: rectangular power equations, residual, Newton-Raphson reference
//! - [`poly`]: multilinear spin/binary polynomials and QUBO reduction
//! - [`hamiltonian`]: the per-iteration spin Hamiltonian and increment schedule
//! - [`solvers`]: exhaustive, simulated annealing and QAOA backends
//! - [`driver`]: the outer refinement loop and trace export

pub mod driver;
pub mod error;
pub mod fixtures;
pub mod flow;
pub mod grid;
pub mod hamiltonian;
pub mod poly;
pub mod solvers;

pub use driver::{export_trace, run_pf, Backend, RunConfig, RunResult, TraceFormat};
pub use error::{Error, Result};
pub use flow::{compute_pq, newton_raphson, residual, PowerInjection, VoltageState};
pub use grid::{build_admittance, load_grid, Branch, Bus, BusKind, GridModel};
pub use hamiltonian::{
    apply_spins, build_hamiltonian, increments, HamiltonianInstance, IncrementSchedule,
};
pub use poly::{BinaryPolynomial, QuboForm, SpinAssignment, SpinPolynomial};
pub use solvers::{solve_exhaustive, solve_qaoa, solve_sa, QaoaConfig, SaConfig, SolveOutcome};
