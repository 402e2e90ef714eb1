//! Software stand-in for an annealing Ising machine: many independent
//! single-spin-flip Metropolis runs, best final sample wins.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{SolveOutcome, SpinSolver, TermTable};
use crate::error::{Error, Result};
use crate::poly::{SpinAssignment, SpinPolynomial};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaConfig {
    pub readouts: usize,
    pub sweeps_per_readout: usize,
    /// `(start, end)` temperatures. `None` derives them from the
    /// polynomial: start at the largest non-constant |coefficient|, end at
    /// a thousandth of that.
    pub temperatures: Option<(f64, f64)>,
    pub seed: u64,
}

impl Default for SaConfig {
    fn default() -> Self {
        Self {
            readouts: 1000,
            sweeps_per_readout: 100,
            temperatures: None,
            seed: 0,
        }
    }
}

impl SaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.readouts == 0 || self.sweeps_per_readout == 0 {
            return Err(Error::Config(
                "readouts and sweeps_per_readout must be >= 1".into(),
            ));
        }
        if let Some((hot, cold)) = self.temperatures {
            if !(hot > cold && cold > 0.0 && hot.is_finite()) {
                return Err(Error::Config(format!(
                    "need temp_start > temp_end > 0, got ({hot}, {cold})"
                )));
            }
        }
        Ok(())
    }

    fn schedule(&self, poly: &SpinPolynomial) -> Vec<f64> {
        let (hot, cold) = self.temperatures.unwrap_or_else(|| {
            let scale = poly.max_abs_coeff();
            let hot = if scale > 0.0 { scale } else { 1.0 };
            (hot, 1e-3 * hot)
        });
        let sweeps = self.sweeps_per_readout;
        if sweeps == 1 {
            return vec![cold];
        }
        let ratio = (cold / hot).ln() / (sweeps - 1) as f64;
        (0..sweeps)
            .map(|k| hot * (ratio * k as f64).exp())
            .collect()
    }
}

impl SpinSolver for SaConfig {
    fn name(&self) -> &'static str {
        "sa"
    }

    fn minimize(&self, poly: &SpinPolynomial) -> Result<SolveOutcome> {
        solve_sa(poly, self)
    }
}

/// Runs `cfg.readouts` independent anneals and returns the lowest-energy
/// final state. Readout `r` draws from its own ChaCha stream `r` under
/// `cfg.seed`, so results do not depend on readout execution order.
pub fn solve_sa(poly: &SpinPolynomial, cfg: &SaConfig) -> Result<SolveOutcome> {
    cfg.validate()?;
    let start = Instant::now();
    let table = TermTable::new(poly);
    let active = table.active_vars();
    let temps = cfg.schedule(poly);
    let n = table.n;

    let mut spins = vec![1i8; n];
    // c_t * prod_{i in t} s_i for every term t
    let mut contrib = vec![0.0; table.coeffs.len()];
    let mut best: Option<(f64, Vec<i8>)> = None;
    let mut best_hits = 0u64;
    let (mut proposed, mut accepted) = (0u64, 0u64);

    for readout in 0..cfg.readouts {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(readout as u64);
        for s in spins.iter_mut() {
            *s = if rng.gen::<bool>() { 1 } else { -1 };
        }
        for (t, c) in contrib.iter_mut().enumerate() {
            *c = table.vars[t]
                .iter()
                .fold(table.coeffs[t], |acc, &i| acc * spins[i] as f64);
        }

        for &temp in &temps {
            let beta = 1.0 / temp;
            for &v in &active {
                let terms = &table.var_terms[v];
                let delta: f64 = -2.0 * terms.iter().map(|&t| contrib[t]).sum::<f64>();
                proposed += 1;
                if delta <= 0.0 || rng.gen::<f64>() < (-delta * beta).exp() {
                    accepted += 1;
                    spins[v] = -spins[v];
                    for &t in terms {
                        contrib[t] = -contrib[t];
                    }
                }
            }
        }

        let e = table.energy(&spins);
        match &best {
            Some((be, _)) if e > *be => {}
            Some((be, _)) if e == *be => best_hits += 1,
            _ => {
                best = Some((e, spins.clone()));
                best_hits = 1;
            }
        }
    }

    let (_, best_spins) = best.expect("at least one readout");
    let best = SpinAssignment::new(best_spins)?;
    let energy = poly.eval(&best)?;
    let mut extra = BTreeMap::new();
    extra.insert(
        "acceptance_rate".into(),
        if proposed == 0 {
            0.0
        } else {
            accepted as f64 / proposed as f64
        },
    );
    extra.insert("temp_start".into(), temps[0]);
    extra.insert("temp_end".into(), *temps.last().unwrap());
    extra.insert("readouts_at_best".into(), best_hits as f64);
    Ok(SolveOutcome {
        best,
        energy,
        samples_evaluated: cfg.readouts as u64,
        elapsed: start.elapsed().as_secs_f64(),
        extra,
    })
}
