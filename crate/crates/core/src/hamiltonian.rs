//! Per-iteration spin Hamiltonian and the increment schedule.
//!
//! Each bus `i` owns two spins: `s_{2i}` moves `mu_i` by `±dmu` and
//! `s_{2i+1}` moves `omega_i` by `±domega`. The slack bus keeps its two
//! spin slots so the problem has `2N` spins, but its increments are pinned
//! to zero and those spins never appear in the polynomial.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::VoltageState;
use crate::grid::GridModel;
use crate::poly::{
    penalty_default, quadratize, spin_to_binary, QuboForm, SpinAssignment, SpinPolynomial,
};

/// Geometric increment decay between fixed endpoints over `it_max` steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IncrementSchedule {
    pub mu_start: f64,
    pub mu_end: f64,
    pub omega_start: f64,
    pub omega_end: f64,
    pub it_max: usize,
}

impl IncrementSchedule {
    pub fn new(it_max: usize) -> Self {
        Self {
            mu_start: 0.1,
            mu_end: 1e-4,
            omega_start: 0.05,
            omega_end: 1e-5,
            it_max,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.it_max >= 1
            && self.mu_end > 0.0
            && self.omega_end > 0.0
            && self.mu_start > self.mu_end
            && self.omega_start > self.omega_end
            && self.mu_start.is_finite()
            && self.omega_start.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "invalid increment schedule {self:?}"
            )))
        }
    }
}

impl Default for IncrementSchedule {
    fn default() -> Self {
        Self::new(300)
    }
}

/// `(dmu, domega)` at iteration `it`:
/// `exp(ln(start) + it * (ln(end) - ln(start)) / it_max)` for each pair.
pub fn increments(it: usize, sched: &IncrementSchedule) -> Result<(f64, f64)> {
    sched.validate()?;
    if it > sched.it_max {
        return Err(Error::IterationRange {
            it,
            it_max: sched.it_max,
        });
    }
    // endpoints returned verbatim; exp(ln(x)) can be off by an ulp
    if it == 0 {
        return Ok((sched.mu_start, sched.omega_start));
    }
    if it == sched.it_max {
        return Ok((sched.mu_end, sched.omega_end));
    }
    let frac = it as f64 / sched.it_max as f64;
    let interp = |start: f64, end: f64| (start.ln() + frac * (end.ln() - start.ln())).exp();
    Ok((
        interp(sched.mu_start, sched.mu_end),
        interp(sched.omega_start, sched.omega_end),
    ))
}

/// Spin index of `s_i^mu`.
pub fn mu_spin(bus: usize) -> usize {
    2 * bus
}

/// Spin index of `s_i^omega`.
pub fn omega_spin(bus: usize) -> usize {
    2 * bus + 1
}

/// Quartic spin polynomial whose value at `s` is the residual of the
/// voltages `apply_spins(base, s, dmu, domega)`.
#[derive(Debug, Clone)]
pub struct HamiltonianInstance {
    pub poly: SpinPolynomial,
    pub base: VoltageState,
    pub dmu: f64,
    pub domega: f64,
}

impl HamiltonianInstance {
    pub fn n_buses(&self) -> usize {
        self.base.len()
    }

    pub fn n_spins(&self) -> usize {
        self.poly.n_vars()
    }

    /// Voltages selected by `s`.
    pub fn voltages(&self, s: &SpinAssignment) -> Result<VoltageState> {
        apply_spins(&self.base, s, self.dmu, self.domega)
    }

    /// Binary QUBO of the Hamiltonian for quadratic-only hardware.
    /// `penalty` defaults to [`penalty_default`].
    pub fn to_qubo(&self, penalty: Option<f64>) -> Result<QuboForm> {
        let binary = spin_to_binary(&self.poly);
        let penalty = penalty.unwrap_or_else(|| penalty_default(&binary));
        quadratize(&binary, penalty)
    }
}

fn check_base(grid: &GridModel, base: &VoltageState) -> Result<()> {
    let n = grid.n_buses();
    if base.mu.len() != n || base.omega.len() != n {
        return Err(Error::Dimension {
            what: "base voltage",
            expected: n,
            got: base.mu.len().max(base.omega.len()),
        });
    }
    let slack = grid.slack_voltage();
    if base.mu[0] != slack.mu || base.omega[0] != slack.omega {
        return Err(Error::SlackMismatch);
    }
    Ok(())
}

/// `P_i(s)` and `Q_i(s)` for every bus as spin polynomials of degree ≤ 2.
pub fn injection_polynomials(
    grid: &GridModel,
    base: &VoltageState,
    dmu: f64,
    domega: f64,
) -> Result<(Vec<SpinPolynomial>, Vec<SpinPolynomial>)> {
    check_base(grid, base)?;
    let n = grid.n_buses();
    let n_spins = 2 * n;
    let coordinate = |value: f64, spin: usize, step: f64, slack: bool| {
        let mut p = SpinPolynomial::constant(n_spins, value);
        if !slack {
            p.add_term(vec![spin], step);
        }
        p
    };
    let mu: Vec<SpinPolynomial> = (0..n)
        .map(|k| coordinate(base.mu[k], mu_spin(k), dmu, k == 0))
        .collect();
    let om: Vec<SpinPolynomial> = (0..n)
        .map(|k| coordinate(base.omega[k], omega_spin(k), domega, k == 0))
        .collect();

    let (g, b) = (grid.g(), grid.b());
    let mut p_polys = Vec::with_capacity(n);
    let mut q_polys = Vec::with_capacity(n);
    for i in 0..n {
        // P_i = mu_i a_i + omega_i c_i,  Q_i = omega_i a_i - mu_i c_i
        let mut a = SpinPolynomial::zero(n_spins);
        let mut c = SpinPolynomial::zero(n_spins);
        for k in 0..n {
            let (gik, bik) = (g[(i, k)], b[(i, k)]);
            if gik == 0.0 && bik == 0.0 {
                continue;
            }
            a = a.try_add(&mu[k].scale(gik))?.try_sub(&om[k].scale(bik))?;
            c = c.try_add(&om[k].scale(gik))?.try_add(&mu[k].scale(bik))?;
        }
        let p = mu[i].try_mul(&a)?.try_add(&om[i].try_mul(&c)?)?;
        let q = om[i].try_mul(&a)?.try_sub(&mu[i].try_mul(&c)?)?;
        p_polys.push(p);
        q_polys.push(q);
    }
    Ok((p_polys, q_polys))
}

/// Expands the squared mismatches of all non-slack buses around `base`.
pub fn build_hamiltonian(
    grid: &GridModel,
    base: &VoltageState,
    dmu: f64,
    domega: f64,
) -> Result<HamiltonianInstance> {
    if !(dmu > 0.0 && domega > 0.0 && dmu.is_finite() && domega.is_finite()) {
        return Err(Error::Config(format!(
            "increments must be positive, got dmu={dmu}, domega={domega}"
        )));
    }
    let (p, q) = injection_polynomials(grid, base, dmu, domega)?;
    let n_spins = 2 * grid.n_buses();
    let mut poly = SpinPolynomial::zero(n_spins);
    for (i, bus) in grid.buses().iter().enumerate().skip(1) {
        let dp = p[i].try_add(&SpinPolynomial::constant(n_spins, -bus.p_net()))?;
        let dq = q[i].try_add(&SpinPolynomial::constant(n_spins, -bus.q_net()))?;
        poly = poly.try_add(&dp.square())?.try_add(&dq.square())?;
    }
    Ok(HamiltonianInstance {
        poly,
        base: base.clone(),
        dmu,
        domega,
    })
}

/// `mu_i = mu_i^0 + s_{2i} dmu`, `omega_i = omega_i^0 + s_{2i+1} domega` for
/// every non-slack bus; the slack entries are copied.
pub fn apply_spins(
    base: &VoltageState,
    s: &SpinAssignment,
    dmu: f64,
    domega: f64,
) -> Result<VoltageState> {
    let n = base.len();
    if s.len() != 2 * n {
        return Err(Error::Dimension {
            what: "spin assignment",
            expected: 2 * n,
            got: s.len(),
        });
    }
    let spins = s.as_slice();
    let mut v = base.clone();
    for i in 1..n {
        v.mu[i] += spins[mu_spin(i)] as f64 * dmu;
        v.omega[i] += spins[omega_spin(i)] as f64 * domega;
    }
    Ok(v)
}
