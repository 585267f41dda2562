//! Polynomials in the formal actions `Ĩ_i = ½(q_i² + p_i²)`.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::scalar::{Coeff, CompensatedSum, ComplexCoeff, RealCoeff};

use super::chart::{complexify, ChartKind};
use super::{MultiIndex, Polynomial};

#[derive(Clone, Debug, PartialEq)]
pub struct ActionPolynomial<R> {
    n: usize,
    terms: BTreeMap<MultiIndex, R>,
}

impl<R: RealCoeff> ActionPolynomial<R> {
    pub fn zero(n: usize) -> Self {
        assert!(n >= 1 && 2 * n <= super::MAX_VARS);
        Self {
            n,
            terms: BTreeMap::new(),
        }
    }

    pub fn from_terms<I>(n: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<u32>, R)>,
    {
        if n == 0 || 2 * n > super::MAX_VARS {
            return Err(Error::invalid(format!("dimension n = {n} out of range 1..=8")));
        }
        let mut out = Self::zero(n);
        for (k, c) in terms {
            if k.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: k.len(),
                });
            }
            out.add_term(MultiIndex::new(&k)?, c);
        }
        Ok(out)
    }

    /// `α·Ĩ + Σ_ij β_ij Ĩ_i Ĩ_j`.
    pub fn from_quadratic(alpha: &[R], beta: Option<&[Vec<R>]>) -> Result<Self> {
        let n = alpha.len();
        let mut out = Self::zero(n);
        for (i, a) in alpha.iter().enumerate() {
            out.add_term(MultiIndex::unit(n, i), a.clone());
        }
        if let Some(beta) = beta {
            if beta.len() != n || beta.iter().any(|r| r.len() != n) {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: beta.len(),
                });
            }
            for i in 0..n {
                for j in 0..n {
                    let k = MultiIndex::unit(n, i).add(&MultiIndex::unit(n, j));
                    out.add_term(k, beta[i][j].clone());
                }
            }
        }
        Ok(out)
    }

    pub(crate) fn add_term(&mut self, k: MultiIndex, c: R) {
        let slot = self.terms.entry(k).or_insert_with(R::zero);
        *slot += c;
        if slot.is_pruned() {
            self.terms.remove(&k);
        }
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, &R)> + '_ {
        self.terms.iter()
    }

    pub fn coeff_of(&self, exps: &[u32]) -> R {
        MultiIndex::new(exps)
            .ok()
            .and_then(|k| self.terms.get(&k).cloned())
            .unwrap_or_else(R::zero)
    }

    /// Degree in `Ĩ` (0 for the zero polynomial).
    pub fn degree(&self) -> u32 {
        self.terms.keys().next_back().map_or(0, MultiIndex::degree)
    }

    /// Terms of degree `<= d` in `Ĩ`.
    pub fn truncate(&self, d: u32) -> Self {
        Self {
            n: self.n,
            terms: self
                .terms
                .iter()
                .filter(|(k, _)| k.degree() <= d)
                .map(|(k, c)| (*k, c.clone()))
                .collect(),
        }
    }

    pub fn homogeneous_part(&self, d: u32) -> Self {
        Self {
            n: self.n,
            terms: self
                .terms
                .iter()
                .filter(|(k, _)| k.degree() == d)
                .map(|(k, c)| (*k, c.clone()))
                .collect(),
        }
    }

    pub fn to_f64(&self) -> ActionPolynomial<f64> {
        ActionPolynomial {
            n: self.n,
            terms: self
                .terms
                .iter()
                .map(|(k, c)| (*k, c.as_f64()))
                .filter(|(_, c)| !c.is_pruned())
                .collect(),
        }
    }

    /// Expansion in `(q, p)` using `Ĩ_i = ½(q_i² + p_i²)`.
    pub fn expand(&self) -> Polynomial<R> {
        let n = self.n;
        let half = R::from_ratio(1, 2);
        let actions: Vec<Polynomial<R>> = (0..n)
            .map(|i| {
                let mut q = vec![0; 2 * n];
                q[i] = 2;
                let mut p = vec![0; 2 * n];
                p[n + i] = 2;
                Polynomial::from_terms(n, vec![(q, half.clone()), (p, half.clone())])
                    .expect("valid action monomials")
            })
            .collect();
        let mut powers: Vec<Vec<Polynomial<R>>> = actions
            .iter()
            .map(|_| vec![Polynomial::constant(n, R::one())])
            .collect();
        let mut out = Polynomial::zero(n);
        for (k, c) in &self.terms {
            let mut term = Polynomial::constant(n, c.clone());
            for i in 0..n {
                let e = k.get(i) as usize;
                while powers[i].len() <= e {
                    let next = powers[i].last().unwrap() * &actions[i];
                    powers[i].push(next);
                }
                if e > 0 {
                    term = &term * &powers[i][e];
                }
            }
            out = &out + &term;
        }
        out
    }

    /// `h(I)` at a real action vector.
    pub fn eval_f64(&self, actions: &[f64]) -> f64 {
        let mut acc = CompensatedSum::new();
        for (k, c) in &self.terms {
            let mut t = c.as_f64();
            for (i, &e) in k.exponents().iter().enumerate() {
                if e > 0 {
                    t *= actions[i].powi(e as i32);
                }
            }
            acc.add(t);
        }
        acc.value()
    }

    /// `∇h(I)`.
    pub fn gradient_f64(&self, actions: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut g = vec![0.0; n];
        for (k, c) in &self.terms {
            let c = c.as_f64();
            for (i, gi) in g.iter_mut().enumerate() {
                let e = k.get(i);
                if e == 0 {
                    continue;
                }
                let mut t = c * e as f64;
                for j in 0..n {
                    let ej = k.get(j) - (i == j) as u32;
                    if ej > 0 {
                        t *= actions[j].powi(ej as i32);
                    }
                }
                *gi += t;
            }
        }
        g
    }

    /// `∇²h(I)` as a dense row-major `n × n` matrix.
    pub fn hessian_f64(&self, actions: &[f64]) -> Vec<Vec<f64>> {
        let n = self.n;
        let mut h = vec![vec![0.0; n]; n];
        for (k, c) in &self.terms {
            let c = c.as_f64();
            for i in 0..n {
                for j in i..n {
                    let mut e = k.to_vec();
                    let f1 = e[i];
                    if f1 == 0 {
                        continue;
                    }
                    e[i] -= 1;
                    let f2 = e[j];
                    if f2 == 0 {
                        continue;
                    }
                    e[j] -= 1;
                    let mut t = c * (f1 * f2) as f64;
                    for (l, &el) in e.iter().enumerate() {
                        if el > 0 {
                            t *= actions[l].powi(el as i32);
                        }
                    }
                    h[i][j] += t;
                    if i != j {
                        h[j][i] += t;
                    }
                }
            }
        }
        h
    }

    /// `Σ |c_k| |k|(|k|−1)(|k|−2) R^{|k|−3}`, a bound for `|D³h(I)[u,v,w]|`
    /// when `‖I‖_∞ <= R` and `u, v, w` have sup norm at most one (so in
    /// particular for Euclidean unit vectors).
    pub fn third_derivative_majorant(&self, radius: f64) -> f64 {
        let mut acc = CompensatedSum::new();
        for (k, c) in &self.terms {
            let d = k.degree() as i32;
            if d < 3 {
                continue;
            }
            let falling = (d * (d - 1) * (d - 2)) as f64;
            acc.add(c.magnitude() * falling * radius.powi(d - 3));
        }
        acc.value()
    }

    /// Same as [`Self::third_derivative_majorant`] for second derivatives.
    pub fn second_derivative_majorant(&self, radius: f64) -> f64 {
        let mut acc = CompensatedSum::new();
        for (k, c) in &self.terms {
            let d = k.degree() as i32;
            if d < 2 {
                continue;
            }
            acc.add(c.magnitude() * (d * (d - 1)) as f64 * radius.powi(d - 2));
        }
        acc.value()
    }
}

/// Writes a phase-space polynomial as a function of the formal actions.
///
/// Each monomial is checked in the chart `w = q − ip`, where the image of
/// `Ĩ_j` is `½ w_j w̄_j`; only paired monomials `w^k w̄^k` are allowed.
pub fn to_action_form<R: RealCoeff>(f: &Polynomial<R>) -> Result<ActionPolynomial<R>> {
    let n = f.dimension();
    let c = complexify(f, ChartKind::Scaled)?;
    let scale = c.terms().map(|(_, v)| v.magnitude()).sum::<f64>()
        * f64::from(f.max_degree().unwrap_or(0).max(1));
    let mut out = ActionPolynomial::zero(n);
    for (k, v) in c.terms() {
        if !k.is_paired() {
            if v.is_roundoff(scale) {
                continue;
            }
            return Err(Error::NotActionRepresentable {
                monomial: k.to_vec(),
            });
        }
        let im = R::Complex::from_real(v.im());
        if !im.is_roundoff(scale) {
            return Err(Error::NotActionRepresentable {
                monomial: k.to_vec(),
            });
        }
        // (w w̄)^k = (2Ĩ)^k
        let mut coef = v.re();
        let two = R::from_i64(2);
        for _ in 0..k.degree() / 2 {
            coef *= two.clone();
        }
        let exps: Vec<u32> = k.q_part().iter().map(|&e| e as u32).collect();
        out.add_term(MultiIndex::new(&exps)?, coef);
    }
    Ok(out)
}
