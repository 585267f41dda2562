//! Independent exact Birkhoff normalization in real coordinates.
//!
//! On homogeneous degree `d` let `A f = {H2, f}`. The generator is the
//! unique `χ ∈ im A` with `A(F_d + Aχ) = 0`; writing `χ = A y` this is
//! `A³ y = −A F_d`, solved by Gaussian elimination over the rationals. The
//! Lie series is then pushed through with plain real Poisson brackets, so
//! nothing here shares code with the chart-based engine beyond polynomial
//! arithmetic.
#![allow(dead_code)]

use hamlab::model::{quadratic_part, EllipticHamiltonian};
use hamlab::poly::{MultiIndex, Polynomial};
use hamlab::scalar::Rational;
use num_traits::{One, Zero};

type Mat = Vec<Vec<Rational>>;

fn basis(n: usize, d: u32) -> Vec<MultiIndex> {
    MultiIndex::all_of_degree(2 * n, d)
}

fn to_vec(p: &Polynomial<Rational>, b: &[MultiIndex]) -> Vec<Rational> {
    b.iter()
        .map(|k| p.coefficient(k).cloned().unwrap_or_else(Rational::zero))
        .collect()
}

fn from_vec(n: usize, v: &[Rational], b: &[MultiIndex]) -> Polynomial<Rational> {
    Polynomial::from_terms(n, b.iter().zip(v).map(|(k, c)| (k.to_vec(), c.clone()))).unwrap()
}

fn ad_matrix(h2: &Polynomial<Rational>, n: usize, b: &[MultiIndex]) -> Mat {
    let mut a = vec![vec![Rational::zero(); b.len()]; b.len()];
    for (j, k) in b.iter().enumerate() {
        let mono = Polynomial::monomial(n, &k.to_vec(), Rational::one()).unwrap();
        let col = to_vec(&h2.poisson_bracket(&mono).unwrap(), b);
        for i in 0..b.len() {
            a[i][j] = col[i].clone();
        }
    }
    a
}

fn mat_mul(a: &Mat, b: &Mat) -> Mat {
    let n = a.len();
    let mut c = vec![vec![Rational::zero(); n]; n];
    for i in 0..n {
        for k in 0..n {
            if a[i][k].is_zero() {
                continue;
            }
            for j in 0..n {
                if !b[k][j].is_zero() {
                    c[i][j] += &a[i][k] * &b[k][j];
                }
            }
        }
    }
    c
}

fn mat_vec(a: &Mat, x: &[Rational]) -> Vec<Rational> {
    a.iter()
        .map(|row| row.iter().zip(x).fold(Rational::zero(), |s, (r, v)| s + r * v))
        .collect()
}

/// Some solution of a consistent system `a x = rhs` (free variables zero).
fn solve(mut a: Mat, mut rhs: Vec<Rational>) -> Vec<Rational> {
    let rows = a.len();
    let cols = a[0].len();
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        let Some(p) = (r..rows).find(|&i| !a[i][c].is_zero()) else {
            continue;
        };
        a.swap(r, p);
        rhs.swap(r, p);
        let inv = Rational::one() / a[r][c].clone();
        for j in 0..cols {
            a[r][j] = &a[r][j] * &inv;
        }
        rhs[r] = &rhs[r] * &inv;
        for i in 0..rows {
            if i != r && !a[i][c].is_zero() {
                let f = a[i][c].clone();
                for j in 0..cols {
                    let t = &f * &a[r][j];
                    a[i][j] -= t;
                }
                let t = &f * &rhs[r];
                rhs[i] -= t;
            }
        }
        pivots.push(c);
        r += 1;
        if r == rows {
            break;
        }
    }
    for i in r..rows {
        assert!(rhs[i].is_zero(), "inconsistent homological system");
    }
    let mut x = vec![Rational::zero(); cols];
    for (i, &c) in pivots.iter().enumerate() {
        x[c] = rhs[i].clone();
    }
    x
}

fn bracket_trunc(f: &Polynomial<Rational>, g: &Polynomial<Rational>, dmax: u32) -> Polynomial<Rational> {
    f.poisson_bracket(g).unwrap().truncate_by_degree(0, dmax)
}

pub struct OracleResult {
    /// `H∘Φ` truncated at the working degree, in `(q, p)`.
    pub transformed: Polynomial<Rational>,
    pub generators: Vec<Polynomial<Rational>>,
}

/// Normalizes degrees `3..=2m` keeping terms up to `d_work`.
pub fn oracle_normal_form(ham: &EllipticHamiltonian<Rational>, m: u32, d_work: u32) -> OracleResult {
    let n = ham.dimension();
    let h2 = quadratic_part(ham.alpha());
    let mut h = ham.polynomial().truncate_by_degree(0, d_work);
    let mut generators = Vec::new();
    for d in 3..=2 * m {
        let b = basis(n, d);
        let a = ad_matrix(&h2, n, &b);
        let a3 = mat_mul(&mat_mul(&a, &a), &a);
        let f = to_vec(&h.homogeneous_part(d), &b);
        let rhs: Vec<Rational> = mat_vec(&a, &f).into_iter().map(|x| -x).collect();
        let y = solve(a3, rhs);
        let chi = from_vec(n, &mat_vec(&a, &y), &b);
        generators.push(chi.clone());
        if chi.is_zero() {
            continue;
        }
        let mut out = h.clone();
        let mut term = h.clone();
        let mut j = 1i64;
        loop {
            term = bracket_trunc(&term, &chi, d_work).scale(&Rational::new(1.into(), j.into()));
            if term.is_zero() {
                break;
            }
            out = &out + &term;
            j += 1;
        }
        h = out;
    }
    OracleResult {
        transformed: h,
        generators,
    }
}

/// Same geometric tail rule the engine documents: extrapolate from the two
/// highest nonzero degree weights.
pub fn geometric_tail(weights: &[(u32, f64)], r: f64) -> f64 {
    let nz: Vec<_> = weights.iter().filter(|(_, w)| *w > 0.0).collect();
    match nz.as_slice() {
        [] => 0.0,
        [_] => f64::INFINITY,
        [.., (d0, w0), (d1, w1)] => {
            let q = (w1 / w0).powf(1.0 / f64::from(d1 - d0)) * r;
            if q >= 1.0 {
                f64::INFINITY
            } else {
                w1 * r.powi(*d1 as i32) * q / (1.0 - q)
            }
        }
    }
}
