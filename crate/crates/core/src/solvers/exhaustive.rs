use std::collections::BTreeMap;
use std::time::Instant;

use super::{SolveOutcome, SpinSolver, TermTable};
use crate::error::{Error, Result};
use crate::poly::{SpinAssignment, SpinPolynomial};

pub const EXHAUSTIVE_LIMIT: usize = 24;

/// Brute-force ground-truth backend.
#[derive(Debug, Clone, Copy, Default)]
pub struct Exhaustive;

impl SpinSolver for Exhaustive {
    fn name(&self) -> &'static str {
        "exhaustive"
    }

    fn minimize(&self, poly: &SpinPolynomial) -> Result<SolveOutcome> {
        solve_exhaustive(poly)
    }
}

/// Enumerates all `2^n` assignments in lexicographic order (`-1 < +1`,
/// `s_0` most significant) and keeps the first minimum, so ties resolve to
/// the lexicographically smallest assignment.
pub fn solve_exhaustive(poly: &SpinPolynomial) -> Result<SolveOutcome> {
    let n = poly.n_vars();
    if n > EXHAUSTIVE_LIMIT {
        return Err(Error::TooLargeForExhaustive {
            n,
            limit: EXHAUSTIVE_LIMIT,
        });
    }
    let start = Instant::now();
    let table = TermTable::new(poly);
    let masks = table.masks();
    let full: u64 = (1u64 << n) - 1;

    let mut best_minus = full;
    let mut best_energy = f64::INFINITY;
    for k in 0..(1u64 << n) {
        // bit n-1-i of k set <=> s_i = +1
        let plus = if n == 0 {
            0
        } else {
            k.reverse_bits() >> (64 - n)
        };
        let minus = !plus & full;
        let e = table.energy_of_mask(&masks, minus);
        if e < best_energy {
            best_energy = e;
            best_minus = minus;
        }
    }
    let best = SpinAssignment::from_basis_index(best_minus as usize, n);
    let energy = poly.eval(&best)?;
    Ok(SolveOutcome {
        best,
        energy,
        samples_evaluated: 1u64 << n,
        elapsed: start.elapsed().as_secs_f64(),
        extra: BTreeMap::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_linear_term() {
        let out = solve_exhaustive(&SpinPolynomial::variable(1, 0)).unwrap();
        assert_eq!(out.best.as_slice(), &[-1]);
        assert_eq!(out.energy, -1.0);
        assert_eq!(out.samples_evaluated, 2);
    }

    #[test]
    fn ferromagnetic_pair_tie_breaks_low() {
        let p = SpinPolynomial::from_terms(2, [(vec![], 1.0), (vec![0, 1], -1.0)]).unwrap();
        let out = solve_exhaustive(&p).unwrap();
        assert_eq!(out.energy, 0.0);
        assert_eq!(out.best.as_slice(), &[-1, -1]);
    }

    #[test]
    fn lexicographic_tie_break_prefers_minus_first() {
        // minimized by s0 = +1 regardless of s1, s2
        let p = SpinPolynomial::from_terms(3, [(vec![0], -1.0)]).unwrap();
        let out = solve_exhaustive(&p).unwrap();
        assert_eq!(out.best.as_slice(), &[1, -1, -1]);
    }

    #[test]
    fn constant_polynomial_and_zero_vars() {
        let out = solve_exhaustive(&SpinPolynomial::constant(0, 2.5)).unwrap();
        assert_eq!(out.energy, 2.5);
        assert!(out.best.is_empty());
    }

    #[test]
    fn rejects_too_many_variables() {
        let err = solve_exhaustive(&SpinPolynomial::zero(25)).unwrap_err();
        assert!(matches!(
            err,
            Error::TooLargeForExhaustive { n: 25, limit: 24 }
        ));
    }

    #[test]
    fn matches_sorted_enumeration() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let n = 6;
            let terms: Vec<(Vec<usize>, f64)> = (0..15)
                .map(|_| {
                    let mut v: Vec<usize> = (0..n).filter(|_| rng.gen_bool(0.4)).collect();
                    v.truncate(4);
                    (v, rng.gen_range(-2i32..=2) as f64)
                })
                .collect();
            let p = SpinPolynomial::from_terms(n, terms).unwrap();
            let mut all: Vec<SpinAssignment> = (0..64)
                .map(|b| SpinAssignment::from_basis_index(b, n))
                .collect();
            all.sort();
            let oracle = all
                .iter()
                .fold(None::<(f64, &SpinAssignment)>, |best, s| {
                    let e = p.eval(s).unwrap();
                    match best {
                        Some((be, _)) if be <= e => best,
                        _ => Some((e, s)),
                    }
                })
                .unwrap();
            let out = solve_exhaustive(&p).unwrap();
            assert_eq!(out.energy, oracle.0);
            assert_eq!(&out.best, oracle.1);
        }
    }
}
