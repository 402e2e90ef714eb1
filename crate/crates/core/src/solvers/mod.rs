//! Minimization backends for spin polynomials.
//!
//! All backends share one bit/spin convention: basis bit `b_i = 0` is
//! `s_i = +1` and `b_i = 1` is `s_i = -1`.

mod anneal;
mod exhaustive;
pub mod qaoa;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::poly::{SpinAssignment, SpinPolynomial};

pub use anneal::{solve_sa, SaConfig};
pub use exhaustive::{solve_exhaustive, Exhaustive, EXHAUSTIVE_LIMIT};
pub use qaoa::{solve_qaoa, QaoaConfig, STATEVECTOR_LIMIT};

/// Result of one backend invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveOutcome {
    pub best: SpinAssignment,
    /// Always `poly.eval(&best)`.
    pub energy: f64,
    pub samples_evaluated: u64,
    /// Wall-clock seconds.
    pub elapsed: f64,
    /// Backend diagnostics.
    pub extra: BTreeMap<String, f64>,
}

/// A backend that minimizes a spin polynomial.
pub trait SpinSolver {
    fn name(&self) -> &'static str;

    fn minimize(&self, poly: &SpinPolynomial) -> Result<SolveOutcome>;
}

/// Flat copy of a polynomial's terms for fast repeated evaluation.
///
/// Term order matches [`SpinPolynomial::terms`], so [`TermTable::energy`]
/// sums exactly the same products in the same order as
/// [`SpinPolynomial::eval`] and returns bit-identical values.
pub(crate) struct TermTable {
    pub n: usize,
    pub coeffs: Vec<f64>,
    pub vars: Vec<Vec<usize>>,
    /// Terms containing each variable.
    pub var_terms: Vec<Vec<usize>>,
}

impl TermTable {
    pub fn new(poly: &SpinPolynomial) -> Self {
        let n = poly.n_vars();
        let mut coeffs = Vec::with_capacity(poly.num_terms());
        let mut vars = Vec::with_capacity(poly.num_terms());
        let mut var_terms = vec![Vec::new(); n];
        for (t, (v, c)) in poly.terms().enumerate() {
            for &i in v {
                var_terms[i].push(t);
            }
            coeffs.push(c);
            vars.push(v.to_vec());
        }
        Self {
            n,
            coeffs,
            vars,
            var_terms,
        }
    }

    pub fn energy(&self, s: &[i8]) -> f64 {
        self.coeffs
            .iter()
            .zip(&self.vars)
            .map(|(&c, v)| v.iter().fold(c, |acc, &i| acc * s[i] as f64))
            .sum()
    }

    /// Energy where bit `i` of `minus` set means `s_i = -1`. Requires `n <= 64`.
    pub fn energy_of_mask(&self, masks: &[u64], minus: u64) -> f64 {
        self.coeffs
            .iter()
            .zip(masks)
            .map(|(&c, &m)| {
                if (m & minus).count_ones() % 2 == 1 {
                    -c
                } else {
                    c
                }
            })
            .sum()
    }

    pub fn masks(&self) -> Vec<u64> {
        self.vars
            .iter()
            .map(|v| v.iter().fold(0u64, |acc, &i| acc | (1 << i)))
            .collect()
    }

    /// Variables that occur in at least one term.
    pub fn active_vars(&self) -> Vec<usize> {
        (0..self.n)
            .filter(|&i| !self.var_terms[i].is_empty())
            .collect()
    }
}
