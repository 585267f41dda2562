//! Sparse multivariate polynomials on phase space `R^{2n}` (or `C^{2n}`).
//!
//! Variables are laid out as `z = (q_1..q_n, p_1..p_n)` and the canonical
//! bracket is `{q_i, p_i} = +1`:
//!
//! ```text
//! {f, g} = Σ_i ∂f/∂q_i ∂g/∂p_i − ∂f/∂p_i ∂g/∂q_i
//! ```
//!
//! Terms are stored in a `BTreeMap` in graded order, so iteration (and every
//! floating-point accumulation built on it) is deterministic.

mod action;
mod chart;
mod eval;
mod json;
mod multi_index;

use std::collections::{BTreeMap, HashMap};
use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{Error, Result};
use crate::scalar::{Coeff, ComplexCoeff, CompensatedSum, RealCoeff};

pub use action::{to_action_form, ActionPolynomial};
pub use chart::{complexify, paired_part, realify, realify_real, ChartKind};
pub use eval::Evaluator;
pub use multi_index::{MultiIndex, MAX_EXPONENT, MAX_VARS};

#[derive(Clone, Debug, PartialEq)]
pub struct Polynomial<C> {
    n: usize,
    terms: BTreeMap<MultiIndex, C>,
}

/// Accumulator for building polynomials term by term.
pub(crate) struct TermAccumulator<C> {
    n: usize,
    map: HashMap<MultiIndex, C>,
}

impl<C: Coeff> TermAccumulator<C> {
    pub(crate) fn new(n: usize) -> Self {
        Self {
            n,
            map: HashMap::new(),
        }
    }

    #[inline]
    pub(crate) fn add(&mut self, key: MultiIndex, value: C) {
        match self.map.get_mut(&key) {
            Some(slot) => *slot += value,
            None => {
                self.map.insert(key, value);
            }
        }
    }

    pub(crate) fn finish(self) -> Polynomial<C> {
        let terms = self
            .map
            .into_iter()
            .filter(|(_, c)| !c.is_pruned())
            .collect();
        Polynomial { n: self.n, terms }
    }
}

impl<C: Coeff> Polynomial<C> {
    pub fn zero(n: usize) -> Self {
        assert!(n >= 1 && 2 * n <= MAX_VARS, "dimension {n} out of range");
        Self {
            n,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(n: usize, c: C) -> Self {
        let mut p = Self::zero(n);
        if !c.is_pruned() {
            p.terms.insert(MultiIndex::zero(2 * n), c);
        }
        p
    }

    /// The coordinate function `z_i`, `0 <= i < 2n`.
    pub fn variable(n: usize, i: usize) -> Self {
        assert!(i < 2 * n);
        let mut p = Self::zero(n);
        p.terms.insert(MultiIndex::unit(2 * n, i), C::one());
        p
    }

    pub fn monomial(n: usize, exps: &[u32], c: C) -> Result<Self> {
        if exps.len() != 2 * n {
            return Err(Error::DimensionMismatch {
                expected: 2 * n,
                got: exps.len(),
            });
        }
        let mut p = Self::zero(n);
        if !c.is_pruned() {
            p.terms.insert(MultiIndex::new(exps)?, c);
        }
        Ok(p)
    }

    /// Builds a polynomial from `(exponents, coefficient)` pairs, summing
    /// repeated monomials.
    pub fn from_terms<I>(n: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<u32>, C)>,
    {
        if n == 0 || 2 * n > MAX_VARS {
            return Err(Error::invalid(format!("dimension n = {n} out of range 1..=8")));
        }
        let mut map: BTreeMap<MultiIndex, C> = BTreeMap::new();
        for (k, c) in terms {
            if k.len() != 2 * n {
                return Err(Error::DimensionMismatch {
                    expected: 2 * n,
                    got: k.len(),
                });
            }
            let key = MultiIndex::new(&k)?;
            match map.get_mut(&key) {
                Some(slot) => *slot += c,
                None => {
                    map.insert(key, c);
                }
            }
        }
        map.retain(|_, c| !c.is_pruned());
        Ok(Self { n, terms: map })
    }

    pub(crate) fn from_map(n: usize, mut terms: BTreeMap<MultiIndex, C>) -> Self {
        terms.retain(|_, c| !c.is_pruned());
        Self { n, terms }
    }

    /// Number of degrees of freedom `n` (the polynomial has `2n` variables).
    pub fn dimension(&self) -> usize {
        self.n
    }

    pub fn num_vars(&self) -> usize {
        2 * self.n
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, &C)> + '_ {
        self.terms.iter()
    }

    pub fn coefficient(&self, k: &MultiIndex) -> Option<&C> {
        self.terms.get(k)
    }

    /// Coefficient of the monomial with the given exponents (zero if absent).
    pub fn coeff_of(&self, exps: &[u32]) -> C {
        MultiIndex::new(exps)
            .ok()
            .and_then(|k| self.terms.get(&k).cloned())
            .unwrap_or_else(C::zero)
    }

    pub fn max_degree(&self) -> Option<u32> {
        self.terms.keys().next_back().map(MultiIndex::degree)
    }

    pub fn min_degree(&self) -> Option<u32> {
        self.terms.keys().next().map(MultiIndex::degree)
    }

    fn check_dim(&self, other: &Self) -> Result<()> {
        if self.n != other.n {
            Err(Error::DimensionMismatch {
                expected: self.n,
                got: other.n,
            })
        } else {
            Ok(())
        }
    }

    pub fn checked_add(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        let mut terms = self.terms.clone();
        for (k, c) in &other.terms {
            match terms.get_mut(k) {
                Some(slot) => *slot += c.clone(),
                None => {
                    terms.insert(*k, c.clone());
                }
            }
        }
        Ok(Self::from_map(self.n, terms))
    }

    pub fn checked_sub(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        self.checked_add(&other.neg_ref())
    }

    fn neg_ref(&self) -> Self {
        Self {
            n: self.n,
            terms: self.terms.iter().map(|(k, c)| (*k, -c.clone())).collect(),
        }
    }

    pub fn checked_mul(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        let mut acc = TermAccumulator::new(self.n);
        for (ka, ca) in &self.terms {
            for (kb, cb) in &other.terms {
                acc.add(ka.add(kb), ca.clone() * cb.clone());
            }
        }
        Ok(acc.finish())
    }

    pub fn scale(&self, c: &C) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|(k, v)| (*k, v.clone() * c.clone()))
            .collect();
        Self::from_map(self.n, terms)
    }

    pub fn pow(&self, e: u32) -> Self {
        let mut out = Self::constant(self.n, C::one());
        for _ in 0..e {
            out = &out * self;
        }
        out
    }

    /// Maps every coefficient into another field.
    pub fn map_coeffs<D: Coeff>(&self, f: impl Fn(&C) -> D) -> Polynomial<D> {
        Polynomial::from_map(self.n, self.terms.iter().map(|(k, c)| (*k, f(c))).collect())
    }

    /// Drops terms failing the predicate.
    pub fn filter_terms(&self, keep: impl Fn(&MultiIndex, &C) -> bool) -> Self {
        Self {
            n: self.n,
            terms: self
                .terms
                .iter()
                .filter(|(k, c)| keep(k, c))
                .map(|(k, c)| (*k, c.clone()))
                .collect(),
        }
    }

    /// Keeps exactly the terms with `d_min <= degree <= d_max`.
    pub fn truncate_by_degree(&self, d_min: u32, d_max: u32) -> Self {
        self.filter_terms(|k, _| (d_min..=d_max).contains(&k.degree()))
    }

    pub fn homogeneous_part(&self, d: u32) -> Self {
        self.truncate_by_degree(d, d)
    }

    /// `∂f/∂z_i`.
    pub fn derivative(&self, i: usize) -> Self {
        assert!(i < 2 * self.n);
        let mut terms = BTreeMap::new();
        for (k, c) in &self.terms {
            if let Some(lower) = k.lower(i) {
                terms.insert(lower, c.clone() * C::from_i64(k.get(i) as i64));
            }
        }
        Self::from_map(self.n, terms)
    }

    pub fn gradient(&self) -> Vec<Self> {
        (0..2 * self.n).map(|i| self.derivative(i)).collect()
    }

    /// Canonical bracket `{self, other}`.
    pub fn poisson_bracket(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        Ok(self.bracket_raw(other, u32::MAX))
    }

    /// Bracket multiplied by `factor`, the value of `{z_i, z_{n+i}}` in the
    /// chart the polynomials are written in, keeping only result terms of
    /// degree at most `max_degree`.
    pub fn bracket_in_chart(&self, other: &Self, factor: &C, max_degree: u32) -> Result<Self> {
        self.check_dim(other)?;
        let raw = self.bracket_raw(other, max_degree);
        if factor.is_one() {
            Ok(raw)
        } else {
            Ok(raw.scale(factor))
        }
    }

    fn bracket_raw(&self, other: &Self, max_degree: u32) -> Self {
        let n = self.n;
        let mut acc = TermAccumulator::new(n);
        for (ka, ca) in &self.terms {
            let da = ka.degree();
            for (kb, cb) in &other.terms {
                // graded order: once the degree sum is too high, so is the rest
                if da + kb.degree() > max_degree.saturating_add(2) {
                    break;
                }
                let mut prod: Option<C> = None;
                for j in 0..n {
                    let w = ka.get(j) as i64 * kb.get(n + j) as i64
                        - ka.get(n + j) as i64 * kb.get(j) as i64;
                    if w == 0 {
                        continue;
                    }
                    let p = prod.get_or_insert_with(|| ca.clone() * cb.clone());
                    let key = ka.add_minus_pair(kb, j, n + j);
                    acc.add(key, p.clone() * C::from_i64(w));
                }
            }
        }
        acc.finish()
    }

    /// Exact evaluation in the coefficient field.
    pub fn evaluate(&self, z: &[C]) -> Result<C> {
        if z.len() != 2 * self.n {
            return Err(Error::DimensionMismatch {
                expected: 2 * self.n,
                got: z.len(),
            });
        }
        let mut total = C::zero();
        for (k, c) in &self.terms {
            let mut term = c.clone();
            for (i, zi) in z.iter().enumerate() {
                for _ in 0..k.get(i) {
                    term *= zi.clone();
                }
            }
            total += term;
        }
        Ok(total)
    }

    /// `Σ |c_k| r^{|k|}`: an upper bound for the sup norm on the complex
    /// polydisc of radius `r`, hence on any ball of radius `r`.
    pub fn majorant_norm(&self, r: f64) -> f64 {
        let mut acc = CompensatedSum::new();
        for (k, c) in &self.terms {
            acc.add(c.magnitude() * r.powi(k.degree() as i32));
        }
        acc.value()
    }

    /// `max_i majorant_norm(∂f/∂z_i, r)`, the majorant of the Hamiltonian
    /// vector field in the sup norm over components.
    pub fn vector_field_majorant(&self, r: f64) -> f64 {
        (0..2 * self.n)
            .map(|i| self.derivative(i).majorant_norm(r))
            .fold(0.0, f64::max)
    }

    /// `Σ |c_k| |k|(|k|−1) r^{|k|−2}`: bounds the Euclidean operator norm of
    /// the Hessian for `‖z‖_∞ <= r`, hence the Lipschitz constant of the
    /// Hamiltonian vector field on the ball of radius `r`.
    pub fn hessian_majorant(&self, r: f64) -> f64 {
        let mut acc = CompensatedSum::new();
        for (k, c) in &self.terms {
            let d = k.degree() as i32;
            if d >= 2 {
                acc.add(c.magnitude() * f64::from(d * (d - 1)) * r.powi(d - 2));
            }
        }
        acc.value()
    }

    /// `rho^power · f(rho z)`: coefficient `c_k` becomes `c_k rho^{|k|+power}`.
    pub fn scale_hamiltonian(&self, rho: &C, power: i32) -> Result<Self> {
        if power != -2 && power != -4 {
            return Err(Error::invalid(format!(
                "scaling power must be -2 or -4, got {power}"
            )));
        }
        if rho.is_zero() {
            return Err(Error::invalid("scaling factor must be positive"));
        }
        let inv = C::one() / rho.clone();
        let mut terms = BTreeMap::new();
        for (k, c) in &self.terms {
            let e = k.degree() as i32 + power;
            let base = if e >= 0 { rho } else { &inv };
            let mut factor = C::one();
            for _ in 0..e.unsigned_abs() {
                factor *= base.clone();
            }
            terms.insert(*k, c.clone() * factor);
        }
        Ok(Self::from_map(self.n, terms))
    }

    /// Substitutes, in every conjugate pair `(z_j, z_{n+j})`, the linear map
    /// `z_j = a u_j + b v_j`, `z_{n+j} = c u_j + d v_j`. The result is
    /// written in `(u_1..u_n, v_1..v_n)`.
    pub(crate) fn substitute_pairs<D: Coeff>(
        &self,
        lift: impl Fn(&C) -> D,
        map: &[[D; 2]; 2],
    ) -> Polynomial<D> {
        let n = self.n;
        let mut cache: HashMap<(u32, u32), Vec<D>> = HashMap::new();
        let mut acc = TermAccumulator::new(n);
        for (k, c) in &self.terms {
            // partial products: (u-exponents, v-exponents) per processed pair
            let mut partial: Vec<(MultiIndex, D)> = vec![(MultiIndex::zero(2 * n), lift(c))];
            for j in 0..n {
                let (kq, kp) = (k.get(j), k.get(n + j));
                if kq == 0 && kp == 0 {
                    continue;
                }
                let expansion = cache
                    .entry((kq, kp))
                    .or_insert_with(|| pair_expansion(kq, kp, map))
                    .clone();
                let total = kq + kp;
                let mut next = Vec::with_capacity(partial.len() * expansion.len());
                for (idx, coef) in &partial {
                    for (x, e) in expansion.iter().enumerate() {
                        if e.is_pruned() {
                            continue;
                        }
                        let mut key = *idx;
                        key.set(j, x as u32);
                        key.set(n + j, total - x as u32);
                        next.push((key, coef.clone() * e.clone()));
                    }
                }
                partial = next;
            }
            for (key, coef) in partial {
                acc.add(key, coef);
            }
        }
        acc.finish()
    }
}

impl<R: RealCoeff> Polynomial<R> {
    /// Float evaluation at a real point with compensated accumulation.
    pub fn eval_f64(&self, z: &[f64]) -> f64 {
        debug_assert_eq!(z.len(), 2 * self.n);
        let mut acc = CompensatedSum::new();
        for (k, c) in &self.terms {
            let mut term = c.as_f64();
            for (i, &e) in k.exponents().iter().enumerate() {
                if e > 0 {
                    term *= z[i].powi(e as i32);
                }
            }
            acc.add(term);
        }
        acc.value()
    }

    pub fn to_f64(&self) -> Polynomial<f64> {
        self.map_coeffs(|c| c.as_f64())
    }

    /// Embeds a real polynomial into the matching complex field.
    pub fn to_complex(&self) -> Polynomial<R::Complex> {
        self.map_coeffs(|c| R::Complex::from_real(c.clone()))
    }
}

impl<C: ComplexCoeff> Polynomial<C> {
    /// Real parts of all coefficients.
    pub fn real_part(&self) -> Polynomial<C::Real> {
        self.map_coeffs(|c| c.re())
    }

    /// Largest imaginary part, relative to the largest coefficient.
    pub fn imaginary_defect(&self) -> f64 {
        let max = self.terms.values().map(|c| c.magnitude()).fold(0.0, f64::max);
        if max == 0.0 {
            return 0.0;
        }
        let im = self
            .terms
            .values()
            .map(|c| c.im().as_f64().abs())
            .fold(0.0, f64::max);
        im / max
    }
}

/// Expansion of `(a u + b v)^kq (c u + d v)^kp`; entry `x` is the
/// coefficient of `u^x v^{kq+kp-x}`.
fn pair_expansion<D: Coeff>(kq: u32, kp: u32, map: &[[D; 2]; 2]) -> Vec<D> {
    let binomial_power = |a: &D, b: &D, k: u32| -> Vec<D> {
        let mut out = vec![D::zero(); k as usize + 1];
        let mut binom: i64 = 1;
        for i in 0..=k {
            // coefficient of u^i v^{k-i}
            let mut t = D::from_i64(binom);
            for _ in 0..i {
                t *= a.clone();
            }
            for _ in i..k {
                t *= b.clone();
            }
            out[i as usize] = t;
            binom = binom * (k - i) as i64 / (i + 1) as i64;
        }
        out
    };
    let left = binomial_power(&map[0][0], &map[0][1], kq);
    let right = binomial_power(&map[1][0], &map[1][1], kp);
    let mut out = vec![D::zero(); (kq + kp) as usize + 1];
    for (i, l) in left.iter().enumerate() {
        for (j, r) in right.iter().enumerate() {
            out[i + j] += l.clone() * r.clone();
        }
    }
    out
}

/// Canonical Poisson bracket `{f, g}` with `{q_i, p_i} = +1`.
pub fn poisson_bracket<C: Coeff>(f: &Polynomial<C>, g: &Polynomial<C>) -> Result<Polynomial<C>> {
    f.poisson_bracket(g)
}

/// Number of monomials of total degree `<= d` in `vars` variables.
pub fn monomial_count(vars: usize, d: u32) -> u128 {
    // C(d + vars, vars)
    let mut num: u128 = 1;
    for i in 1..=vars as u128 {
        num = num * (d as u128 + i) / i;
    }
    num
}

impl<C: Coeff> Add for &Polynomial<C> {
    type Output = Polynomial<C>;

    /// Panics on dimension mismatch; see [`Polynomial::checked_add`].
    fn add(self, rhs: Self) -> Polynomial<C> {
        self.checked_add(rhs).expect("polynomial dimensions differ")
    }
}

impl<C: Coeff> Sub for &Polynomial<C> {
    type Output = Polynomial<C>;

    fn sub(self, rhs: Self) -> Polynomial<C> {
        self.checked_sub(rhs).expect("polynomial dimensions differ")
    }
}

impl<C: Coeff> Mul for &Polynomial<C> {
    type Output = Polynomial<C>;

    fn mul(self, rhs: Self) -> Polynomial<C> {
        self.checked_mul(rhs).expect("polynomial dimensions differ")
    }
}

impl<C: Coeff> Neg for &Polynomial<C> {
    type Output = Polynomial<C>;

    fn neg(self) -> Polynomial<C> {
        self.neg_ref()
    }
}
