//! Fast repeated evaluation of a fixed real polynomial and its gradient.

use super::Polynomial;
use crate::scalar::{CompensatedSum, RealCoeff};

#[derive(Clone, Debug)]
struct Flat {
    coeffs: Vec<f64>,
    /// Row-major `terms × vars` exponents.
    exps: Vec<u8>,
}

impl Flat {
    fn new<R: RealCoeff>(p: &Polynomial<R>) -> Self {
        let vars = p.num_vars();
        let mut coeffs = Vec::with_capacity(p.len());
        let mut exps = Vec::with_capacity(p.len() * vars);
        for (k, c) in p.terms() {
            coeffs.push(c.as_f64());
            exps.extend_from_slice(k.exponents());
        }
        Self { coeffs, exps }
    }

    fn eval(&self, pows: &PowerTable) -> f64 {
        let vars = pows.vars;
        let mut acc = CompensatedSum::new();
        for (t, &c) in self.coeffs.iter().enumerate() {
            let mut v = c;
            for (i, &e) in self.exps[t * vars..(t + 1) * vars].iter().enumerate() {
                if e > 0 {
                    v *= pows.get(i, e);
                }
            }
            acc.add(v);
        }
        acc.value()
    }
}

struct PowerTable {
    vars: usize,
    stride: usize,
    data: Vec<f64>,
}

impl PowerTable {
    fn new(z: &[f64], max_exp: usize) -> Self {
        let stride = max_exp + 1;
        let mut data = vec![1.0; z.len() * stride];
        for (i, &x) in z.iter().enumerate() {
            for e in 1..stride {
                data[i * stride + e] = data[i * stride + e - 1] * x;
            }
        }
        Self {
            vars: z.len(),
            stride,
            data,
        }
    }

    #[inline]
    fn get(&self, i: usize, e: u8) -> f64 {
        self.data[i * self.stride + e as usize]
    }
}

/// Compiled form of `H` together with `∂H/∂z_i`.
#[derive(Clone, Debug)]
pub struct Evaluator {
    n: usize,
    max_exp: usize,
    value: Flat,
    grad: Vec<Flat>,
}

impl Evaluator {
    pub fn new<R: RealCoeff>(p: &Polynomial<R>) -> Self {
        let max_exp = p
            .terms()
            .flat_map(|(k, _)| k.exponents().iter().copied())
            .max()
            .unwrap_or(0) as usize;
        Self {
            n: p.dimension(),
            max_exp,
            value: Flat::new(p),
            grad: (0..p.num_vars()).map(|i| Flat::new(&p.derivative(i))).collect(),
        }
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    pub fn value(&self, z: &[f64]) -> f64 {
        self.value.eval(&PowerTable::new(z, self.max_exp))
    }

    pub fn gradient(&self, z: &[f64], out: &mut [f64]) {
        let pows = PowerTable::new(z, self.max_exp);
        for (o, g) in out.iter_mut().zip(&self.grad) {
            *o = g.eval(&pows);
        }
    }

    /// Hamiltonian vector field `(∂H/∂p, −∂H/∂q)`.
    pub fn vector_field(&self, z: &[f64], out: &mut [f64]) {
        let n = self.n;
        let pows = PowerTable::new(z, self.max_exp);
        for i in 0..n {
            out[i] = self.grad[n + i].eval(&pows);
            out[n + i] = -self.grad[i].eval(&pows);
        }
    }
}
