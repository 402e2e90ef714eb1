//! QAOA on a dense statevector.
//!
//! The state is `prod_k exp(-i beta_k H_M) exp(-i gamma_k H_C) |+>^n` with
//! `H_M = sum_i X_i` and `H_C` diagonal, `H_C |b> = E(b) |b>` where `E(b)`
//! is the polynomial evaluated at the spins decoded from basis index `b`.
//! Qubit `i` is bit `i` of the basis index.
//!
//! Angles are trained with Adam. Mixer-angle gradients use the two-term
//! parameter-shift rule on each single-qubit rotation `exp(-i beta X_q)`
//! (shift `±π/4`), summed over qubits; cost-angle gradients use central
//! finite differences. In sampled mode every evaluation within one
//! optimizer step reuses the same set of uniform draws, so shifted
//! evaluations differ only where the distributions differ.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_4, TAU};
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{SolveOutcome, SpinSolver, TermTable};
use crate::error::{Error, Result};
use crate::poly::{SpinAssignment, SpinPolynomial};

pub const STATEVECTOR_LIMIT: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QaoaConfig {
    pub depth_p: usize,
    pub steps: usize,
    pub learning_rate: f64,
    pub shots: usize,
    pub seed: u64,
    /// Train on the exact expectation instead of shot estimates.
    pub exact_expectation: bool,
    /// Central-difference step for the cost angles.
    pub fd_step: f64,
}

impl Default for QaoaConfig {
    fn default() -> Self {
        Self {
            depth_p: 2,
            steps: 100,
            learning_rate: 0.1,
            shots: 1000,
            seed: 0,
            exact_expectation: false,
            fd_step: 1e-2,
        }
    }
}

impl QaoaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.depth_p == 0 || self.steps == 0 || self.shots == 0 {
            return Err(Error::Config(
                "depth_p, steps and shots must be >= 1".into(),
            ));
        }
        if !(self.learning_rate > 0.0 && self.fd_step > 0.0) {
            return Err(Error::Config(
                "learning_rate and fd_step must be positive".into(),
            ));
        }
        Ok(())
    }
}

impl SpinSolver for QaoaConfig {
    fn name(&self) -> &'static str {
        "qaoa"
    }

    fn minimize(&self, poly: &SpinPolynomial) -> Result<SolveOutcome> {
        solve_qaoa(poly, self)
    }
}

/// Variational angles, one `gamma` and one `beta` per layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaoaParams {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
}

impl QaoaParams {
    pub fn depth(&self) -> usize {
        self.gamma.len()
    }
}

/// `E(b)` for every basis index `b`.
pub fn basis_energies(poly: &SpinPolynomial) -> Result<Vec<f64>> {
    let n = poly.n_vars();
    if n > STATEVECTOR_LIMIT {
        return Err(Error::TooLargeForStatevector {
            n,
            limit: STATEVECTOR_LIMIT,
        });
    }
    let table = TermTable::new(poly);
    let masks = table.masks();
    Ok((0..1u64 << n)
        .map(|b| table.energy_of_mask(&masks, b))
        .collect())
}

pub fn uniform_superposition(n: usize) -> Vec<Complex64> {
    let dim = 1usize << n;
    vec![Complex64::new(1.0 / (dim as f64).sqrt(), 0.0); dim]
}

pub fn norm_sqr(state: &[Complex64]) -> f64 {
    state.iter().map(|a| a.norm_sqr()).sum()
}

/// Multiplies amplitude `b` by `exp(-i gamma energies[b])`.
pub fn apply_phase(state: &mut [Complex64], energies: &[f64], gamma: f64) {
    for (a, &e) in state.iter_mut().zip(energies) {
        let (s, c) = (gamma * e).sin_cos();
        *a *= Complex64::new(c, -s);
    }
}

/// Cost layer `exp(-i gamma H_C)` for the diagonal operator of `poly`.
pub fn apply_cost_phase(state: &mut [Complex64], poly: &SpinPolynomial, gamma: f64) -> Result<()> {
    let n = poly.n_vars();
    if n > STATEVECTOR_LIMIT || state.len() != 1usize << n {
        return Err(Error::Dimension {
            what: "statevector length",
            expected: 1usize << n.min(STATEVECTOR_LIMIT),
            got: state.len(),
        });
    }
    apply_phase(state, &basis_energies(poly)?, gamma);
    Ok(())
}

/// `exp(-i beta X_q)` on one qubit.
pub fn apply_mixer_qubit(state: &mut [Complex64], qubit: usize, beta: f64) {
    let (s, c) = beta.sin_cos();
    let bit = 1usize << qubit;
    let dim = state.len();
    let mut base = 0;
    while base < dim {
        for i in base..base + bit {
            let j = i | bit;
            let (a, b) = (state[i], state[j]);
            // c*a - i s*b  and  c*b - i s*a
            state[i] = Complex64::new(c * a.re + s * b.im, c * a.im - s * b.re);
            state[j] = Complex64::new(c * b.re + s * a.im, c * b.im - s * a.re);
        }
        base += 2 * bit;
    }
}

/// Mixer layer `exp(-i beta sum_q X_q)`, applied as commuting single-qubit
/// rotations.
pub fn apply_mixer(state: &mut [Complex64], beta: f64) {
    let n = state.len().trailing_zeros() as usize;
    for q in 0..n {
        apply_mixer_qubit(state, q, beta);
    }
}

pub fn exact_expectation(state: &[Complex64], energies: &[f64]) -> f64 {
    state
        .iter()
        .zip(energies)
        .map(|(a, &e)| a.norm_sqr() * e)
        .sum()
}

/// Maps sorted uniforms in `[0, 1)` to basis indices by inverse CDF and
/// calls `visit` once per sample, in ascending index order.
fn for_each_sample(state: &[Complex64], sorted_uniforms: &[f64], mut visit: impl FnMut(usize)) {
    let mut cum = 0.0;
    let mut j = 0;
    let mut last_nonzero = 0;
    for (b, a) in state.iter().enumerate() {
        let p = a.norm_sqr();
        if p > 0.0 {
            last_nonzero = b;
        }
        cum += p;
        while j < sorted_uniforms.len() && sorted_uniforms[j] < cum {
            visit(b);
            j += 1;
        }
    }
    // rounding can leave cum slightly below 1
    for _ in j..sorted_uniforms.len() {
        visit(last_nonzero);
    }
}

/// Sample mean of `E(b)` over the shots encoded by `sorted_uniforms`.
pub fn sampled_expectation(state: &[Complex64], energies: &[f64], sorted_uniforms: &[f64]) -> f64 {
    let mut total = 0.0;
    for_each_sample(state, sorted_uniforms, |b| total += energies[b]);
    total / sorted_uniforms.len() as f64
}

fn sorted_uniforms(rng: &mut ChaCha8Rng, shots: usize) -> Vec<f64> {
    let mut u: Vec<f64> = (0..shots).map(|_| rng.gen::<f64>()).collect();
    u.sort_by(f64::total_cmp);
    u
}

/// A fixed cost Hamiltonian and depth.
pub struct QaoaCircuit {
    n: usize,
    depth: usize,
    energies: Vec<f64>,
}

impl QaoaCircuit {
    pub fn new(poly: &SpinPolynomial, depth: usize) -> Result<Self> {
        if depth == 0 {
            return Err(Error::Config("depth_p must be >= 1".into()));
        }
        Ok(Self {
            n: poly.n_vars(),
            depth,
            energies: basis_energies(poly)?,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    fn check(&self, params: &QaoaParams) {
        assert_eq!(params.gamma.len(), self.depth, "gamma length");
        assert_eq!(params.beta.len(), self.depth, "beta length");
    }

    pub fn state(&self, params: &QaoaParams) -> Vec<Complex64> {
        self.check(params);
        let mut st = uniform_superposition(self.n);
        for k in 0..self.depth {
            apply_phase(&mut st, &self.energies, params.gamma[k]);
            apply_mixer(&mut st, params.beta[k]);
        }
        st
    }

    pub fn expectation(&self, params: &QaoaParams) -> f64 {
        exact_expectation(&self.state(params), &self.energies)
    }

    /// Gradient of `eval(state(params))`: parameter shift for every beta,
    /// central differences with step `fd_step` for every gamma.
    pub fn gradient_with(
        &self,
        params: &QaoaParams,
        fd_step: f64,
        eval: &mut dyn FnMut(&[Complex64]) -> f64,
    ) -> QaoaParams {
        self.check(params);
        let p = self.depth;
        let mut grad = QaoaParams {
            gamma: vec![0.0; p],
            beta: vec![0.0; p],
        };

        // states right before each mixer layer
        let mut before_mixer = Vec::with_capacity(p);
        let mut st = uniform_superposition(self.n);
        for k in 0..p {
            apply_phase(&mut st, &self.energies, params.gamma[k]);
            before_mixer.push(st.clone());
            apply_mixer(&mut st, params.beta[k]);
        }

        let finish = |st: &mut Vec<Complex64>, from: usize| {
            for k in from..p {
                apply_phase(st, &self.energies, params.gamma[k]);
                apply_mixer(st, params.beta[k]);
            }
        };

        for k in 0..p {
            let mut g = 0.0;
            for q in 0..self.n {
                for (shift, sign) in [(FRAC_PI_4, 1.0), (-FRAC_PI_4, -1.0)] {
                    let mut st = before_mixer[k].clone();
                    for qq in 0..self.n {
                        let angle = params.beta[k] + if qq == q { shift } else { 0.0 };
                        apply_mixer_qubit(&mut st, qq, angle);
                    }
                    finish(&mut st, k + 1);
                    g += sign * eval(&st);
                }
            }
            grad.beta[k] = g;

            let mut shifted = params.clone();
            shifted.gamma[k] = params.gamma[k] + fd_step;
            let plus = eval(&self.state(&shifted));
            shifted.gamma[k] = params.gamma[k] - fd_step;
            let minus = eval(&self.state(&shifted));
            grad.gamma[k] = (plus - minus) / (2.0 * fd_step);
        }
        grad
    }

    /// Gradient of the exact expectation.
    pub fn exact_gradient(&self, params: &QaoaParams, fd_step: f64) -> QaoaParams {
        let energies = &self.energies;
        self.gradient_with(params, fd_step, &mut |st| exact_expectation(st, energies))
    }

    /// Number of circuit evaluations per gradient.
    pub fn evaluations_per_gradient(&self) -> usize {
        2 * self.depth * (self.n + 1)
    }
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
    lr: f64,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(len: usize, lr: f64) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
            lr,
        }
    }

    fn step(&mut self, theta: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.t);
        let c2 = 1.0 - Self::BETA2.powi(self.t);
        for i in 0..theta.len() {
            self.m[i] = Self::BETA1 * self.m[i] + (1.0 - Self::BETA1) * grad[i];
            self.v[i] = Self::BETA2 * self.v[i] + (1.0 - Self::BETA2) * grad[i] * grad[i];
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            theta[i] -= self.lr * m_hat / (v_hat.sqrt() + Self::EPS);
        }
    }
}

/// Trains the angles, then draws `cfg.shots` samples from the trained state
/// and returns the lowest-energy one (lowest basis index among ties).
pub fn solve_qaoa(poly: &SpinPolynomial, cfg: &QaoaConfig) -> Result<SolveOutcome> {
    cfg.validate()?;
    let start = Instant::now();
    let circuit = QaoaCircuit::new(poly, cfg.depth_p)?;
    let p = cfg.depth_p;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = QaoaParams {
        gamma: (0..p).map(|_| rng.gen_range(0.0..TAU)).collect(),
        beta: (0..p).map(|_| rng.gen_range(0.0..TAU)).collect(),
    };
    let initial = circuit.expectation(&params);

    let mut adam = Adam::new(2 * p, cfg.learning_rate);
    let mut samples = 0u64;
    let energies = circuit.energies();
    for _ in 0..cfg.steps {
        let grad = if cfg.exact_expectation {
            circuit.exact_gradient(&params, cfg.fd_step)
        } else {
            let u = sorted_uniforms(&mut rng, cfg.shots);
            samples += (cfg.shots * circuit.evaluations_per_gradient()) as u64;
            circuit.gradient_with(&params, cfg.fd_step, &mut |st| {
                sampled_expectation(st, energies, &u)
            })
        };
        let mut theta: Vec<f64> = params.gamma.iter().chain(&params.beta).copied().collect();
        let g: Vec<f64> = grad.gamma.iter().chain(&grad.beta).copied().collect();
        adam.step(&mut theta, &g);
        params.gamma.copy_from_slice(&theta[..p]);
        params.beta.copy_from_slice(&theta[p..]);
    }

    let state = circuit.state(&params);
    let final_expectation = exact_expectation(&state, energies);
    let u = sorted_uniforms(&mut rng, cfg.shots);
    samples += cfg.shots as u64;
    let mut best_index = None::<usize>;
    for_each_sample(&state, &u, |b| match best_index {
        Some(cur) if energies[b] >= energies[cur] => {}
        _ => best_index = Some(b),
    });
    let best_index = best_index.expect("shots >= 1");

    let best = SpinAssignment::from_basis_index(best_index, circuit.n_qubits());
    let energy = poly.eval(&best)?;
    let mut extra = BTreeMap::new();
    extra.insert("initial_expectation".into(), initial);
    extra.insert("final_expectation".into(), final_expectation);
    extra.insert("best_probability".into(), state[best_index].norm_sqr());
    for k in 0..p {
        extra.insert(format!("gamma_{}", k + 1), params.gamma[k]);
        extra.insert(format!("beta_{}", k + 1), params.beta[k]);
    }
    Ok(SolveOutcome {
        best,
        energy,
        samples_evaluated: samples,
        elapsed: start.elapsed().as_secs_f64(),
        extra,
    })
}
