//! Degree reduction of binary polynomials to QUBO form.
//!
//! Uses pairwise substitution: the variable pair that occurs most often in
//! terms of degree ≥ 3 (ties go to the lexicographically smallest pair) is
//! replaced there by a fresh auxiliary `y`, and the penalty
//! `M (x_i x_j - 2 x_i y - 2 x_j y + 3 y)` is added. The penalty is zero iff
//! `y = x_i x_j` and at least `M` otherwise. Repeats until every term has
//! degree ≤ 2.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::BinaryPolynomial;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct QuboForm {
    n_original: usize,
    n_total: usize,
    linear: Vec<f64>,
    quadratic: BTreeMap<(usize, usize), f64>,
    offset: f64,
    aux_registry: BTreeMap<usize, (usize, usize)>,
    penalty: f64,
}

impl QuboForm {
    /// Number of variables of the polynomial the form was reduced from.
    pub fn n_original(&self) -> usize {
        self.n_original
    }

    /// Original plus auxiliary variables.
    pub fn n_total(&self) -> usize {
        self.n_total
    }

    pub fn linear(&self) -> &[f64] {
        &self.linear
    }

    /// Couplings keyed by `(i, j)` with `i < j`.
    pub fn quadratic(&self) -> &BTreeMap<(usize, usize), f64> {
        &self.quadratic
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// Auxiliary index to the pair of variables it stands for. A pair may
    /// itself contain an earlier auxiliary.
    pub fn aux_registry(&self) -> &BTreeMap<usize, (usize, usize)> {
        &self.aux_registry
    }

    pub fn penalty(&self) -> f64 {
        self.penalty
    }

    pub fn energy(&self, x: &[u8]) -> Result<f64> {
        if x.len() != self.n_total {
            return Err(Error::Dimension {
                what: "qubo assignment",
                expected: self.n_total,
                got: x.len(),
            });
        }
        let mut e = self.offset;
        for (i, &c) in self.linear.iter().enumerate() {
            if x[i] == 1 {
                e += c;
            }
        }
        for (&(i, j), &c) in &self.quadratic {
            if x[i] == 1 && x[j] == 1 {
                e += c;
            }
        }
        Ok(e)
    }

    /// Fills in every auxiliary from its registered pair, in creation order.
    pub fn extend_assignment(&self, original: &[u8]) -> Result<Vec<u8>> {
        if original.len() != self.n_original {
            return Err(Error::Dimension {
                what: "original assignment",
                expected: self.n_original,
                got: original.len(),
            });
        }
        let mut x = original.to_vec();
        x.resize(self.n_total, 0);
        for (&y, &(i, j)) in &self.aux_registry {
            x[y] = x[i] & x[j];
        }
        Ok(x)
    }

    /// True when every auxiliary equals the product of its pair.
    pub fn aux_consistent(&self, x: &[u8]) -> bool {
        self.aux_registry
            .iter()
            .all(|(&y, &(i, j))| x[y] == (x[i] & x[j]))
    }

    pub fn to_binary_polynomial(&self) -> BinaryPolynomial {
        let mut p = BinaryPolynomial::constant(self.n_total, self.offset);
        for (i, &c) in self.linear.iter().enumerate() {
            p.add_term(vec![i], c);
        }
        for (&(i, j), &c) in &self.quadratic {
            p.add_term(vec![i, j], c);
        }
        p
    }

    /// Plain-text export: `# key value` header lines, then one `i j coeff`
    /// line per nonzero coefficient (`i == j` for linear terms).
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "# offset {:?}", self.offset).unwrap();
        writeln!(out, "# variables {}", self.n_total).unwrap();
        writeln!(out, "# original {}", self.n_original).unwrap();
        writeln!(out, "# penalty {:?}", self.penalty).unwrap();
        for (y, (i, j)) in &self.aux_registry {
            writeln!(out, "# aux {y} {i} {j}").unwrap();
        }
        for (i, &c) in self.linear.iter().enumerate() {
            if c != 0.0 {
                writeln!(out, "{i} {i} {c:?}").unwrap();
            }
        }
        for ((i, j), c) in &self.quadratic {
            writeln!(out, "{i} {j} {c:?}").unwrap();
        }
        out
    }

    /// Parses the output of [`QuboForm::to_text`]. Only `# offset` is
    /// required; unknown comment lines are ignored.
    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |line: &str| Error::Parse(format!("bad qubo line `{line}`"));
        let mut offset = None;
        let mut n_total = None;
        let mut n_original = None;
        let mut penalty = 0.0;
        let mut aux_registry = BTreeMap::new();
        let mut entries = Vec::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            let fields: Vec<&str> = line.trim_start_matches('#').split_whitespace().collect();
            if line.starts_with('#') {
                match fields.as_slice() {
                    ["offset", v] => offset = Some(v.parse().map_err(|_| bad(line))?),
                    ["variables", v] => n_total = Some(v.parse().map_err(|_| bad(line))?),
                    ["original", v] => n_original = Some(v.parse().map_err(|_| bad(line))?),
                    ["penalty", v] => penalty = v.parse().map_err(|_| bad(line))?,
                    ["aux", y, i, j] => {
                        let p = |s: &str| s.parse::<usize>().map_err(|_| bad(line));
                        aux_registry.insert(p(y)?, (p(i)?, p(j)?));
                    }
                    _ => {}
                }
                continue;
            }
            match fields.as_slice() {
                [i, j, c] => {
                    let i: usize = i.parse().map_err(|_| bad(line))?;
                    let j: usize = j.parse().map_err(|_| bad(line))?;
                    let c: f64 = c.parse().map_err(|_| bad(line))?;
                    entries.push((i.min(j), i.max(j), c));
                }
                _ => return Err(bad(line)),
            }
        }
        let offset = offset.ok_or_else(|| Error::Parse("missing `# offset` header".into()))?;
        let inferred = entries.iter().map(|&(_, j, _)| j + 1).max().unwrap_or(0);
        let n_total = n_total.unwrap_or(inferred).max(inferred);
        let mut linear = vec![0.0; n_total];
        let mut quadratic = BTreeMap::new();
        for (i, j, c) in entries {
            if i == j {
                linear[i] += c;
            } else {
                *quadratic.entry((i, j)).or_insert(0.0) += c;
            }
        }
        Ok(Self {
            n_original: n_original.unwrap_or(n_total),
            n_total,
            linear,
            quadratic,
            offset,
            aux_registry,
            penalty,
        })
    }
}

/// `2 * sum |c|` over the non-constant terms, or 1 when there are none.
///
/// Any single inconsistent auxiliary then costs more than the largest
/// possible swing of the substituted objective.
pub fn penalty_default(p: &BinaryPolynomial) -> f64 {
    let total: f64 = p
        .terms()
        .filter(|(v, _)| !v.is_empty())
        .map(|(_, c)| c.abs())
        .sum();
    if total > 0.0 {
        2.0 * total
    } else {
        1.0
    }
}

/// Reduces `p` to degree ≤ 2 with auxiliary variables weighted by `penalty`.
pub fn quadratize(p: &BinaryPolynomial, penalty: f64) -> Result<QuboForm> {
    if !(penalty > 0.0 && penalty.is_finite()) {
        return Err(Error::Config(format!(
            "penalty must be positive, got {penalty}"
        )));
    }
    let n_original = p.n_vars();
    let mut terms: BTreeMap<Vec<usize>, f64> = p.terms().map(|(v, c)| (v.to_vec(), c)).collect();
    let mut n_total = n_original;
    let mut aux_registry = BTreeMap::new();

    loop {
        let mut counts: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for vars in terms.keys().filter(|v| v.len() >= 3) {
            for (a, &i) in vars.iter().enumerate() {
                for &j in &vars[a + 1..] {
                    *counts.entry((i, j)).or_insert(0) += 1;
                }
            }
        }
        // first maximum in ascending key order = smallest pair among ties
        let Some((&(i, j), _)) = counts.iter().fold(
            None,
            |best: Option<(&(usize, usize), &usize)>, cur| match best {
                Some(b) if b.1 >= cur.1 => Some(b),
                _ => Some(cur),
            },
        ) else {
            break;
        };

        let y = n_total;
        n_total += 1;
        aux_registry.insert(y, (i, j));

        let hit: Vec<Vec<usize>> = terms
            .keys()
            .filter(|v| v.len() >= 3 && v.binary_search(&i).is_ok() && v.binary_search(&j).is_ok())
            .cloned()
            .collect();
        for vars in hit {
            let c = terms.remove(&vars).unwrap();
            let mut reduced: Vec<usize> = vars.into_iter().filter(|&v| v != i && v != j).collect();
            reduced.push(y);
            add(&mut terms, reduced, c);
        }
        add(&mut terms, vec![i, j], penalty);
        add(&mut terms, vec![i, y], -2.0 * penalty);
        add(&mut terms, vec![j, y], -2.0 * penalty);
        add(&mut terms, vec![y], 3.0 * penalty);
    }

    let mut linear = vec![0.0; n_total];
    let mut quadratic = BTreeMap::new();
    let mut offset = 0.0;
    for (vars, c) in terms {
        match vars.as_slice() {
            [] => offset = c,
            [i] => linear[*i] = c,
            [i, j] => {
                quadratic.insert((*i, *j), c);
            }
            _ => unreachable!("degree > 2 after reduction"),
        }
    }
    Ok(QuboForm {
        n_original,
        n_total,
        linear,
        quadratic,
        offset,
        aux_registry,
        penalty,
    })
}

fn add(terms: &mut BTreeMap<Vec<usize>, f64>, key: Vec<usize>, c: f64) {
    use std::collections::btree_map::Entry;
    match terms.entry(key) {
        Entry::Occupied(mut e) => {
            let sum = *e.get() + c;
            if sum.abs() < super::ZERO_TOL {
                e.remove();
            } else {
                *e.get_mut() = sum;
            }
        }
        Entry::Vacant(e) => {
            if c.abs() >= super::ZERO_TOL {
                e.insert(c);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bits(index: usize, n: usize) -> Vec<u8> {
        (0..n).map(|i| ((index >> i) & 1) as u8).collect()
    }

    #[test]
    fn quadratic_input_is_unchanged() {
        let p = BinaryPolynomial::from_terms(
            3,
            [
                (vec![], 0.5),
                (vec![0], -1.0),
                (vec![1, 2], 2.0),
                (vec![0, 2], -3.0),
            ],
        )
        .unwrap();
        let q = quadratize(&p, 1.0).unwrap();
        assert!(q.aux_registry().is_empty());
        assert_eq!(q.n_total(), 3);
        assert_eq!(q.to_binary_polynomial(), p);
    }

    #[test]
    fn cubic_monomial_reduces_with_one_aux() {
        let p = BinaryPolynomial::from_terms(3, [(vec![0, 1, 2], 1.0)]).unwrap();
        let q = quadratize(&p, 4.0).unwrap();
        assert_eq!(q.n_total(), 4);
        assert_eq!(q.aux_registry().get(&3), Some(&(0, 1)));

        // p's minimum is 0, attained by every x except (1,1,1)
        let p_min: Vec<usize> = (0..8)
            .filter(|&b| p.evaluate(&bits(b, 3)).unwrap() == 0.0)
            .collect();
        let energies: Vec<(usize, f64)> = (0..16)
            .map(|b| (b, q.energy(&bits(b, 4)).unwrap()))
            .collect();
        let q_min = energies.iter().map(|e| e.1).fold(f64::INFINITY, f64::min);
        assert_eq!(q_min, 0.0);
        let mut projected: Vec<usize> = energies
            .iter()
            .filter(|e| e.1 == q_min)
            .map(|e| {
                let x = bits(e.0, 4);
                assert!(q.aux_consistent(&x));
                e.0 & 0b111
            })
            .collect();
        projected.sort();
        projected.dedup();
        assert_eq!(projected, p_min);
    }

    #[test]
    fn penalty_default_values() {
        let p = BinaryPolynomial::from_terms(3, [(vec![0, 1, 2], 1.0)]).unwrap();
        assert_eq!(penalty_default(&p), 2.0);
        let p =
            BinaryPolynomial::from_terms(2, [(vec![0], 3.0), (vec![0, 1], -4.0), (vec![], 9.0)])
                .unwrap();
        assert_eq!(penalty_default(&p), 14.0);
        assert_eq!(penalty_default(&BinaryPolynomial::constant(2, 3.0)), 1.0);
    }

    #[test]
    fn nonpositive_penalty_rejected() {
        let p = BinaryPolynomial::from_terms(3, [(vec![0, 1, 2], 1.0)]).unwrap();
        assert!(quadratize(&p, 0.0).is_err());
        assert!(quadratize(&p, -1.0).is_err());
    }

    #[test]
    fn most_frequent_pair_is_substituted_first() {
        // (1,2) occurs in both cubic terms, (0,1) only in one
        let p =
            BinaryPolynomial::from_terms(4, [(vec![0, 1, 2], 1.0), (vec![1, 2, 3], 1.0)]).unwrap();
        let q = quadratize(&p, 10.0).unwrap();
        assert_eq!(q.aux_registry().get(&4), Some(&(1, 2)));
        assert_eq!(q.n_total(), 5);
    }

    #[test]
    fn quartic_chains_auxiliaries() {
        let p = BinaryPolynomial::from_terms(4, [(vec![0, 1, 2, 3], -1.0)]).unwrap();
        let q = quadratize(&p, penalty_default(&p)).unwrap();
        assert_eq!(q.aux_registry().get(&4), Some(&(0, 1)));
        assert_eq!(q.aux_registry().get(&5), Some(&(2, 3)));
        for b in 0..16 {
            let x = q.extend_assignment(&bits(b, 4)).unwrap();
            assert_eq!(q.energy(&x).unwrap(), p.evaluate(&bits(b, 4)).unwrap());
        }
    }

    #[test]
    fn text_header_and_lines() {
        let p =
            BinaryPolynomial::from_terms(2, [(vec![], 1.5), (vec![0], -2.0), (vec![0, 1], 3.0)])
                .unwrap();
        let q = quadratize(&p, 1.0).unwrap();
        let text = q.to_text();
        assert!(text.starts_with("# offset 1.5\n"));
        assert!(text.contains("\n0 0 -2.0\n"));
        assert!(text.contains("\n0 1 3.0\n"));
        assert!(QuboForm::from_text("0 0 1.0").is_err());
        assert!(QuboForm::from_text("# offset 0\n0 x 1").is_err());
    }

    fn arb_binary(n: usize) -> impl Strategy<Value = BinaryPolynomial> {
        proptest::collection::vec(
            (
                proptest::sample::subsequence((0..n).collect::<Vec<_>>(), 0..=4),
                -3.0..3.0f64,
            ),
            1..10,
        )
        .prop_map(move |t| BinaryPolynomial::from_terms(n, t).unwrap())
    }

    proptest! {
        #[test]
        fn text_round_trip(p in arb_binary(6)) {
            let q = quadratize(&p, penalty_default(&p)).unwrap();
            prop_assert_eq!(QuboForm::from_text(&q.to_text()).unwrap(), q);
        }

        #[test]
        fn consistent_extension_reproduces_polynomial(p in arb_binary(6)) {
            let q = quadratize(&p, penalty_default(&p)).unwrap();
            prop_assert!(q.to_binary_polynomial().degree() <= 2);
            for b in 0..64 {
                let x = bits(b, 6);
                let e = q.energy(&q.extend_assignment(&x).unwrap()).unwrap();
                let v = p.evaluate(&x).unwrap();
                prop_assert!((e - v).abs() <= 1e-9 * (1.0 + v.abs()));
            }
        }
    }
}
