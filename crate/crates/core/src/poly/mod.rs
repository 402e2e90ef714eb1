//! Multilinear polynomials over spin (`s = ±1`) and binary (`x ∈ {0,1}`)
//! variables.
//!
//! Terms are keyed by sorted, duplicate-free index sets; the empty set is the
//! constant. Reduction is applied eagerly on every insertion (`s_i² = 1`,
//! `x_i² = x_i`) and coefficients with magnitude below [`ZERO_TOL`] are
//! dropped, so the map never holds a non-multilinear or zero term.

mod qubo;

use std::collections::BTreeMap;
use std::fmt;
use std::marker::PhantomData;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use qubo::{penalty_default, quadratize, QuboForm};

/// Coefficients smaller than this are treated as zero and removed.
pub const ZERO_TOL: f64 = 1e-15;

/// Variable domain of a [`Polynomial`].
pub trait Domain: Clone + fmt::Debug + PartialEq {
    type Value: Copy + fmt::Debug;

    /// Sorts `vars` and applies the domain's idempotence rule.
    fn reduce(vars: &mut Vec<usize>);

    /// Monomial product of two already reduced index sets.
    fn merge(a: &[usize], b: &[usize]) -> Vec<usize>;

    fn factor(value: Self::Value) -> f64;

    fn check(position: usize, value: Self::Value) -> Result<()>;
}

/// Spin variables: `s_i s_i = 1`, so repeated indices cancel in pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct Spin;

/// Binary variables: `x_i x_i = x_i`, so repeated indices collapse.
#[derive(Debug, Clone, PartialEq)]
pub struct Binary;

impl Domain for Spin {
    type Value = i8;

    fn reduce(vars: &mut Vec<usize>) {
        vars.sort_unstable();
        let mut out = Vec::with_capacity(vars.len());
        let mut i = 0;
        while i < vars.len() {
            let mut j = i;
            while j < vars.len() && vars[j] == vars[i] {
                j += 1;
            }
            if (j - i) % 2 == 1 {
                out.push(vars[i]);
            }
            i = j;
        }
        *vars = out;
    }

    fn merge(a: &[usize], b: &[usize]) -> Vec<usize> {
        // symmetric difference of two sorted sets
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => {
                    out.push(a[i]);
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    out.push(b[j]);
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        out
    }

    fn factor(value: i8) -> f64 {
        value as f64
    }

    fn check(position: usize, value: i8) -> Result<()> {
        if value == 1 || value == -1 {
            Ok(())
        } else {
            Err(Error::InvalidSpin { position, value })
        }
    }
}

impl Domain for Binary {
    type Value = u8;

    fn reduce(vars: &mut Vec<usize>) {
        vars.sort_unstable();
        vars.dedup();
    }

    fn merge(a: &[usize], b: &[usize]) -> Vec<usize> {
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => {
                    out.push(a[i]);
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    out.push(b[j]);
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    out.push(a[i]);
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        out
    }

    fn factor(value: u8) -> f64 {
        value as f64
    }

    fn check(position: usize, value: u8) -> Result<()> {
        if value <= 1 {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "binary value {value} at position {position} is not 0 or 1"
            )))
        }
    }
}

/// Sparse multilinear polynomial in `n_vars` variables of domain `D`.
#[derive(Clone, PartialEq)]
pub struct Polynomial<D: Domain> {
    n_vars: usize,
    terms: BTreeMap<Vec<usize>, f64>,
    _domain: PhantomData<D>,
}

pub type SpinPolynomial = Polynomial<Spin>;
pub type BinaryPolynomial = Polynomial<Binary>;

impl<D: Domain> fmt::Debug for Polynomial<D> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Polynomial")
            .field("n_vars", &self.n_vars)
            .field("terms", &self.terms)
            .finish()
    }
}

impl<D: Domain> Polynomial<D> {
    pub fn zero(n_vars: usize) -> Self {
        Self {
            n_vars,
            terms: BTreeMap::new(),
            _domain: PhantomData,
        }
    }

    pub fn constant(n_vars: usize, c: f64) -> Self {
        let mut p = Self::zero(n_vars);
        p.add_term(Vec::new(), c);
        p
    }

    /// The single variable `v_index`. Panics when out of range.
    pub fn variable(n_vars: usize, index: usize) -> Self {
        assert!(index < n_vars, "variable {index} out of range for {n_vars}");
        let mut p = Self::zero(n_vars);
        p.add_term(vec![index], 1.0);
        p
    }

    /// Builds a polynomial from arbitrary (possibly repeated, unsorted)
    /// index lists; like terms are combined.
    pub fn from_terms<I>(n_vars: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<usize>, f64)>,
    {
        let mut p = Self::zero(n_vars);
        for (vars, c) in terms {
            if let Some(&bad) = vars.iter().find(|&&v| v >= n_vars) {
                return Err(Error::Dimension {
                    what: "polynomial variable index",
                    expected: n_vars,
                    got: bad + 1,
                });
            }
            p.add_term(vars, c);
        }
        Ok(p)
    }

    /// Adds `c` times the monomial over `vars`, reducing it first.
    pub fn add_term(&mut self, mut vars: Vec<usize>, c: f64) {
        D::reduce(&mut vars);
        self.accumulate(vars, c);
    }

    fn accumulate(&mut self, key: Vec<usize>, c: f64) {
        if c == 0.0 {
            return;
        }
        let entry = self.terms.entry(key);
        match entry {
            std::collections::btree_map::Entry::Occupied(mut e) => {
                let sum = *e.get() + c;
                if sum.abs() < ZERO_TOL {
                    e.remove();
                } else {
                    *e.get_mut() = sum;
                }
            }
            std::collections::btree_map::Entry::Vacant(e) => {
                if c.abs() >= ZERO_TOL {
                    e.insert(c);
                }
            }
        }
    }

    fn prune(&mut self) {
        self.terms.retain(|_, c| c.abs() >= ZERO_TOL);
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    /// Terms in ascending key order; the constant (empty key) comes first.
    pub fn terms(&self) -> impl Iterator<Item = (&[usize], f64)> {
        self.terms.iter().map(|(k, &c)| (k.as_slice(), c))
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn coeff(&self, vars: &[usize]) -> f64 {
        let mut key = vars.to_vec();
        D::reduce(&mut key);
        self.terms.get(&key).copied().unwrap_or(0.0)
    }

    pub fn constant_term(&self) -> f64 {
        self.terms.get(&Vec::new()).copied().unwrap_or(0.0)
    }

    pub fn degree(&self) -> usize {
        self.terms.keys().map(Vec::len).max().unwrap_or(0)
    }

    pub fn is_constant(&self) -> bool {
        self.degree() == 0
    }

    /// Indices that occur in at least one term, ascending.
    pub fn support(&self) -> Vec<usize> {
        let mut seen = vec![false; self.n_vars];
        for k in self.terms.keys() {
            for &v in k {
                seen[v] = true;
            }
        }
        (0..self.n_vars).filter(|&v| seen[v]).collect()
    }

    /// Largest absolute coefficient among non-constant terms.
    pub fn max_abs_coeff(&self) -> f64 {
        self.terms
            .iter()
            .filter(|(k, _)| !k.is_empty())
            .map(|(_, c)| c.abs())
            .fold(0.0, f64::max)
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.n_vars != other.n_vars {
            return Err(Error::VariableCount(self.n_vars, other.n_vars));
        }
        Ok(())
    }

    pub fn try_add(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        let mut out = self.clone();
        for (k, &c) in &other.terms {
            out.accumulate(k.clone(), c);
        }
        Ok(out)
    }

    pub fn try_sub(&self, other: &Self) -> Result<Self> {
        self.try_add(&other.scale(-1.0))
    }

    pub fn try_mul(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        let mut acc: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
        for (ka, &ca) in &self.terms {
            for (kb, &cb) in &other.terms {
                *acc.entry(D::merge(ka, kb)).or_insert(0.0) += ca * cb;
            }
        }
        let mut out = Self {
            n_vars: self.n_vars,
            terms: acc,
            _domain: PhantomData,
        };
        out.prune();
        Ok(out)
    }

    pub fn square(&self) -> Self {
        self.try_mul(self).expect("same variable count")
    }

    pub fn scale(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for c in out.terms.values_mut() {
            *c *= factor;
        }
        out.prune();
        out
    }

    /// Sum of `coeff * prod(values[i])` over all terms, in key order.
    pub fn evaluate(&self, values: &[D::Value]) -> Result<f64> {
        if values.len() != self.n_vars {
            return Err(Error::Dimension {
                what: "assignment length",
                expected: self.n_vars,
                got: values.len(),
            });
        }
        for (i, &v) in values.iter().enumerate() {
            D::check(i, v)?;
        }
        Ok(self
            .terms
            .iter()
            .map(|(k, &c)| k.iter().fold(c, |acc, &v| acc * D::factor(values[v])))
            .sum())
    }
}

impl SpinPolynomial {
    /// Value at a spin assignment.
    pub fn eval(&self, s: &SpinAssignment) -> Result<f64> {
        self.evaluate(s.as_slice())
    }
}

/// A point of `{+1, -1}^n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<i8>", into = "Vec<i8>")]
pub struct SpinAssignment(Vec<i8>);

impl SpinAssignment {
    pub fn new(values: Vec<i8>) -> Result<Self> {
        for (i, &v) in values.iter().enumerate() {
            Spin::check(i, v)?;
        }
        Ok(Self(values))
    }

    pub fn all(n: usize, value: i8) -> Result<Self> {
        Self::new(vec![value; n])
    }

    /// Decodes a computational-basis index: bit `i` (little-endian) equal
    /// to 0 maps to `s_i = +1`, 1 maps to `s_i = -1`.
    pub fn from_basis_index(index: usize, n: usize) -> Self {
        Self(
            (0..n)
                .map(|i| if (index >> i) & 1 == 0 { 1 } else { -1 })
                .collect(),
        )
    }

    /// Inverse of [`SpinAssignment::from_basis_index`].
    pub fn basis_index(&self) -> usize {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, &s)| s == -1)
            .fold(0, |acc, (i, _)| acc | (1 << i))
    }

    /// Binary image under `x = (s + 1) / 2`.
    pub fn to_binary(&self) -> Vec<u8> {
        self.0.iter().map(|&s| ((s + 1) / 2) as u8).collect()
    }

    pub fn from_binary(x: &[u8]) -> Result<Self> {
        Self::new(x.iter().map(|&b| 2 * b as i8 - 1).collect())
    }

    pub fn as_slice(&self) -> &[i8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl TryFrom<Vec<i8>> for SpinAssignment {
    type Error = Error;

    fn try_from(v: Vec<i8>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<SpinAssignment> for Vec<i8> {
    fn from(s: SpinAssignment) -> Self {
        s.0
    }
}

/// Rewrites a spin polynomial in binary variables via `s_i = 2 x_i - 1`.
pub fn spin_to_binary(p: &SpinPolynomial) -> BinaryPolynomial {
    let mut out = BinaryPolynomial::zero(p.n_vars());
    for (vars, c) in p.terms() {
        // prod (2x_i - 1) = sum over subsets T of 2^|T| (-1)^(|S|-|T|) x_T
        let d = vars.len();
        for mask in 0u64..(1 << d) {
            let picked: Vec<usize> = (0..d)
                .filter(|b| mask >> b & 1 == 1)
                .map(|b| vars[b])
                .collect();
            let sign = if (d - picked.len()) % 2 == 0 {
                1.0
            } else {
                -1.0
            };
            let weight = (1u64 << picked.len()) as f64;
            out.accumulate(picked, c * sign * weight);
        }
    }
    out
}

/// Rewrites a binary polynomial in spin variables via `x_i = (1 + s_i) / 2`.
pub fn binary_to_spin(p: &BinaryPolynomial) -> SpinPolynomial {
    let mut out = SpinPolynomial::zero(p.n_vars());
    for (vars, c) in p.terms() {
        let d = vars.len();
        let weight = c / (1u64 << d) as f64;
        for mask in 0u64..(1 << d) {
            let picked: Vec<usize> = (0..d)
                .filter(|b| mask >> b & 1 == 1)
                .map(|b| vars[b])
                .collect();
            out.accumulate(picked, weight);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn s(n: usize, i: usize) -> SpinPolynomial {
        SpinPolynomial::variable(n, i)
    }

    #[test]
    fn spin_square_is_one() {
        let p = s(1, 0).try_mul(&s(1, 0)).unwrap();
        assert_eq!(p, SpinPolynomial::constant(1, 1.0));
    }

    #[test]
    fn difference_of_squares_vanishes() {
        let one = SpinPolynomial::constant(1, 1.0);
        let a = one.try_add(&s(1, 0)).unwrap();
        let b = one.try_sub(&s(1, 0)).unwrap();
        let p = a.try_mul(&b).unwrap();
        assert_eq!(p.num_terms(), 0);
        assert_eq!(p.constant_term(), 0.0);
    }

    #[test]
    fn square_of_pair_plus_single() {
        // (s0 s1 + s2)^2 = 1 + 1 + 2 s0 s1 s2
        let p = SpinPolynomial::from_terms(3, [(vec![0, 1], 1.0), (vec![2], 1.0)]).unwrap();
        let sq = p.square();
        let expected =
            SpinPolynomial::from_terms(3, [(vec![], 2.0), (vec![0, 1, 2], 2.0)]).unwrap();
        assert_eq!(sq, expected);
    }

    #[test]
    fn mismatched_variable_counts() {
        let err = s(2, 0).try_add(&s(3, 0)).unwrap_err();
        assert!(matches!(err, Error::VariableCount(2, 3)));
        assert!(s(2, 0).try_mul(&s(3, 0)).is_err());
    }

    #[test]
    fn from_terms_reduces_repeats() {
        let p = SpinPolynomial::from_terms(3, [(vec![2, 0, 2, 1, 0, 0], 1.5)]).unwrap();
        assert_eq!(p.coeff(&[0, 1]), 1.5);
        let b = BinaryPolynomial::from_terms(3, [(vec![2, 0, 2], 1.5)]).unwrap();
        assert_eq!(b.coeff(&[0, 2]), 1.5);
        assert!(SpinPolynomial::from_terms(2, [(vec![2], 1.0)]).is_err());
    }

    #[test]
    fn eval_constant_and_sign_product() {
        let c = SpinPolynomial::constant(2, 4.25);
        let any = SpinAssignment::new(vec![1, -1]).unwrap();
        assert_eq!(c.eval(&any).unwrap(), 4.25);
        let p = SpinPolynomial::from_terms(2, [(vec![0, 1], 3.0)]).unwrap();
        assert_eq!(p.eval(&any).unwrap(), -3.0);
    }

    #[test]
    fn eval_length_mismatch() {
        let p = s(3, 0);
        let short = SpinAssignment::new(vec![1, 1]).unwrap();
        assert!(matches!(p.eval(&short), Err(Error::Dimension { .. })));
    }

    #[test]
    fn spin_assignment_rejects_zero() {
        assert!(matches!(
            SpinAssignment::new(vec![1, 0]),
            Err(Error::InvalidSpin {
                position: 1,
                value: 0
            })
        ));
    }

    #[test]
    fn basis_index_convention() {
        let sp = SpinAssignment::from_basis_index(0b101, 3);
        assert_eq!(sp.as_slice(), &[-1, 1, -1]);
        assert_eq!(sp.basis_index(), 0b101);
        assert_eq!(sp.to_binary(), vec![0, 1, 0]);
    }

    #[test]
    fn single_spin_to_binary() {
        let b = spin_to_binary(&s(1, 0));
        let expected = BinaryPolynomial::from_terms(1, [(vec![0], 2.0), (vec![], -1.0)]).unwrap();
        assert_eq!(b, expected);
    }

    #[test]
    fn spin_pair_to_binary() {
        let p = SpinPolynomial::from_terms(2, [(vec![0, 1], 1.0)]).unwrap();
        let expected = BinaryPolynomial::from_terms(
            2,
            [
                (vec![0, 1], 4.0),
                (vec![0], -2.0),
                (vec![1], -2.0),
                (vec![], 1.0),
            ],
        )
        .unwrap();
        assert_eq!(spin_to_binary(&p), expected);
    }

    /// Term-by-term evaluation straight from the term list.
    fn naive_eval(terms: &[(Vec<usize>, f64)], s: &[i8]) -> f64 {
        terms
            .iter()
            .map(|(vars, c)| c * vars.iter().map(|&v| s[v] as f64).product::<f64>())
            .sum()
    }

    fn all_spins(n: usize) -> impl Iterator<Item = SpinAssignment> {
        (0..1usize << n).map(move |b| SpinAssignment::from_basis_index(b, n))
    }

    fn arb_terms(n: usize, max_deg: usize) -> impl Strategy<Value = Vec<(Vec<usize>, f64)>> {
        proptest::collection::vec(
            (
                proptest::sample::subsequence((0..n).collect::<Vec<_>>(), 0..=max_deg),
                -5i32..=5,
            ),
            0..12,
        )
        .prop_map(|v| v.into_iter().map(|(vars, c)| (vars, c as f64)).collect())
    }

    fn arb_spin_poly(n: usize, max_deg: usize) -> impl Strategy<Value = SpinPolynomial> {
        arb_terms(n, max_deg).prop_map(move |t| SpinPolynomial::from_terms(n, t).unwrap())
    }

    #[test]
    fn random_quartic_matches_naive_oracle_on_all_assignments() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let n = 6;
        let terms: Vec<(Vec<usize>, f64)> = (0..20)
            .map(|_| {
                let mut vars: Vec<usize> = (0..n).filter(|_| rng.gen_bool(0.5)).take(4).collect();
                vars.sort();
                (vars, rng.gen_range(-3.0..3.0))
            })
            .collect();
        let p = SpinPolynomial::from_terms(n, terms.clone()).unwrap();
        for sp in all_spins(n) {
            let exact = p.eval(&sp).unwrap();
            let naive = naive_eval(&terms, sp.as_slice());
            assert!((exact - naive).abs() < 1e-12, "{exact} vs {naive}");
        }
    }

    #[test]
    fn random_quartic_spin_to_binary_pointwise() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let n = 6;
        let terms: Vec<(Vec<usize>, f64)> = (0..25)
            .map(|_| {
                let mut vars: Vec<usize> = (0..n).collect();
                vars.retain(|_| rng.gen_bool(0.6));
                vars.truncate(4);
                (vars, rng.gen_range(-2.0..2.0))
            })
            .collect();
        let p = SpinPolynomial::from_terms(n, terms).unwrap();
        let b = spin_to_binary(&p);
        assert!(b.degree() <= p.degree());
        for sp in all_spins(n) {
            let lhs = p.eval(&sp).unwrap();
            let rhs = b.evaluate(&sp.to_binary()).unwrap();
            assert!((lhs - rhs).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn spin_to_binary_is_pointwise_exact(p in arb_spin_poly(5, 4)) {
            let b = spin_to_binary(&p);
            for sp in all_spins(5) {
                // integer coefficients keep both sides exact
                prop_assert_eq!(p.eval(&sp).unwrap(), b.evaluate(&sp.to_binary()).unwrap());
            }
        }

        #[test]
        fn binary_round_trip(p in arb_spin_poly(5, 4)) {
            let back = binary_to_spin(&spin_to_binary(&p));
            prop_assert_eq!(back, p);
        }

        #[test]
        fn mul_commutes(a in arb_spin_poly(6, 3), b in arb_spin_poly(6, 3)) {
            prop_assert_eq!(a.try_mul(&b).unwrap(), b.try_mul(&a).unwrap());
        }

        #[test]
        fn mul_associates(a in arb_spin_poly(6, 2), b in arb_spin_poly(6, 2), c in arb_spin_poly(6, 2)) {
            let left = a.try_mul(&b).unwrap().try_mul(&c).unwrap();
            let right = a.try_mul(&b.try_mul(&c).unwrap()).unwrap();
            prop_assert_eq!(left, right);
        }

        #[test]
        fn products_stay_multilinear(a in arb_spin_poly(6, 4), b in arb_spin_poly(6, 4)) {
            for p in [a.try_mul(&b).unwrap(), a.try_add(&b).unwrap()] {
                for (vars, c) in p.terms() {
                    prop_assert!(vars.windows(2).all(|w| w[0] < w[1]));
                    prop_assert!(c.abs() >= ZERO_TOL);
                }
            }
        }

        #[test]
        fn product_evaluates_to_product(a in arb_spin_poly(5, 3), b in arb_spin_poly(5, 3)) {
            let ab = a.try_mul(&b).unwrap();
            for sp in all_spins(5) {
                prop_assert_eq!(ab.eval(&sp).unwrap(), a.eval(&sp).unwrap() * b.eval(&sp).unwrap());
            }
        }
    }
}
