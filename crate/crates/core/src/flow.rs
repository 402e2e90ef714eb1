//! Rectangular power-flow equations and the Newton-Raphson reference.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridModel;

/// Bus voltages `mu + j omega` in per-unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoltageState {
    pub mu: Vec<f64>,
    pub omega: Vec<f64>,
}

impl VoltageState {
    pub fn new(mu: Vec<f64>, omega: Vec<f64>) -> Result<Self> {
        if mu.len() != omega.len() {
            return Err(Error::Dimension {
                what: "voltage omega",
                expected: mu.len(),
                got: omega.len(),
            });
        }
        Ok(Self { mu, omega })
    }

    /// Flat start (`mu = 1`, `omega = 0`) with the slack entry set to the
    /// grid's slack voltage.
    pub fn flat(grid: &GridModel) -> Self {
        let n = grid.n_buses();
        let mut v = Self {
            mu: vec![1.0; n],
            omega: vec![0.0; n],
        };
        let slack = grid.slack_voltage();
        v.mu[0] = slack.mu;
        v.omega[0] = slack.omega;
        v
    }

    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }

    fn check(&self, grid: &GridModel) -> Result<()> {
        let n = grid.n_buses();
        if self.mu.len() != n || self.omega.len() != n {
            return Err(Error::Dimension {
                what: "voltage state",
                expected: n,
                got: self.mu.len().max(self.omega.len()),
            });
        }
        Ok(())
    }
}

/// Net injections `P_i`, `Q_i` computed from a voltage state.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerInjection {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
}

/// Evaluates
///
/// ```text
/// P_i = sum_k  mu_i G_ik mu_k + omega_i G_ik omega_k + omega_i B_ik mu_k - mu_i B_ik omega_k
/// Q_i = sum_k  omega_i G_ik mu_k - mu_i G_ik omega_k - mu_i B_ik mu_k - omega_i B_ik omega_k
/// ```
pub fn compute_pq(grid: &GridModel, v: &VoltageState) -> Result<PowerInjection> {
    v.check(grid)?;
    let (g, b) = (grid.g(), grid.b());
    let n = grid.n_buses();
    let (mu, om) = (&v.mu, &v.omega);
    let mut p = vec![0.0; n];
    let mut q = vec![0.0; n];
    for i in 0..n {
        let (mut pi, mut qi) = (0.0, 0.0);
        for k in 0..n {
            let (gik, bik) = (g[(i, k)], b[(i, k)]);
            pi += mu[i] * gik * mu[k] + om[i] * gik * om[k] + om[i] * bik * mu[k]
                - mu[i] * bik * om[k];
            qi += om[i] * gik * mu[k]
                - mu[i] * gik * om[k]
                - mu[i] * bik * mu[k]
                - om[i] * bik * om[k];
        }
        p[i] = pi;
        q[i] = qi;
    }
    Ok(PowerInjection { p, q })
}

/// Power mismatches of the non-slack buses, laid out as
/// `[dP_1 .. dP_{N-1}, dQ_1 .. dQ_{N-1}]` with `dP_i = P_i - P^G_i + P^D_i`.
pub fn mismatch(grid: &GridModel, v: &VoltageState) -> Result<Vec<f64>> {
    let pq = compute_pq(grid, v)?;
    let n = grid.n_buses();
    let buses = grid.buses();
    let mut out = Vec::with_capacity(2 * (n - 1));
    out.extend((1..n).map(|i| pq.p[i] - buses[i].p_net()));
    out.extend((1..n).map(|i| pq.q[i] - buses[i].q_net()));
    Ok(out)
}

/// Sum of squared active and reactive mismatches over the non-slack buses.
pub fn residual(grid: &GridModel, v: &VoltageState) -> Result<f64> {
    Ok(mismatch(grid, v)?.iter().map(|m| m * m).sum())
}

/// Analytic Jacobian of [`mismatch`] with respect to
/// `[mu_1 .. mu_{N-1}, omega_1 .. omega_{N-1}]`.
pub fn jacobian(grid: &GridModel, v: &VoltageState) -> Result<DMatrix<f64>> {
    v.check(grid)?;
    let (g, b) = (grid.g(), grid.b());
    let n = grid.n_buses();
    let m = n - 1;
    let (mu, om) = (&v.mu, &v.omega);
    // P_i = mu_i a_i + omega_i c_i and Q_i = omega_i a_i - mu_i c_i with
    // a_i = sum_k G_ik mu_k - B_ik omega_k, c_i = sum_k G_ik omega_k + B_ik mu_k
    let mut jac = DMatrix::zeros(2 * m, 2 * m);
    for i in 1..n {
        let a: f64 = (0..n).map(|k| g[(i, k)] * mu[k] - b[(i, k)] * om[k]).sum();
        let c: f64 = (0..n).map(|k| g[(i, k)] * om[k] + b[(i, k)] * mu[k]).sum();
        let (rp, rq) = (i - 1, m + i - 1);
        for k in 1..n {
            let (gik, bik) = (g[(i, k)], b[(i, k)]);
            let (cm, co) = (k - 1, m + k - 1);
            let diag = i == k;
            jac[(rp, cm)] = mu[i] * gik + om[i] * bik + if diag { a } else { 0.0 };
            jac[(rp, co)] = om[i] * gik - mu[i] * bik + if diag { c } else { 0.0 };
            jac[(rq, cm)] = om[i] * gik - mu[i] * bik - if diag { c } else { 0.0 };
            jac[(rq, co)] = -om[i] * bik - mu[i] * gik + if diag { a } else { 0.0 };
        }
    }
    Ok(jac)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 50,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NewtonSolution {
    pub voltage: VoltageState,
    /// Number of Newton corrections applied.
    pub iterations: usize,
    pub residual: f64,
    /// Every iterate after the start point, in order.
    pub history: Vec<VoltageState>,
}

/// Full-step Newton-Raphson on the rectangular mismatch equations.
/// Stops as soon as `residual <= tol`; slack entries are never touched.
pub fn newton_raphson(
    grid: &GridModel,
    v0: &VoltageState,
    opts: NewtonOptions,
) -> Result<NewtonSolution> {
    if !(opts.tol > 0.0) || opts.max_iter == 0 {
        return Err(Error::Config(
            "newton_raphson needs tol > 0 and max_iter >= 1".into(),
        ));
    }
    v0.check(grid)?;
    let n = grid.n_buses();
    let m = n - 1;
    let mut v = v0.clone();
    let mut history = Vec::new();
    let mut iteration = 0;
    loop {
        let f = mismatch(grid, &v)?;
        let res: f64 = f.iter().map(|x| x * x).sum();
        if res <= opts.tol {
            log::debug!("newton-raphson converged after {iteration} corrections, residual {res:e}");
            return Ok(NewtonSolution {
                voltage: v,
                iterations: iteration,
                residual: res,
                history,
            });
        }
        if iteration == opts.max_iter || !res.is_finite() {
            return Err(Error::NrDiverged {
                last: Box::new(v),
                residual: res,
            });
        }
        let jac = jacobian(grid, &v)?;
        let rhs = -DVector::from_vec(f);
        let step = jac
            .lu()
            .solve(&rhs)
            .filter(|s| s.iter().all(|x| x.is_finite()))
            .ok_or(Error::JacobianSingular { iteration })?;
        for i in 1..n {
            v.mu[i] += step[i - 1];
            v.omega[i] += step[m + i - 1];
        }
        iteration += 1;
        history.push(v.clone());
    }
}
