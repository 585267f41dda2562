//! Hamiltonians `H(z) = α·Ĩ(z) + V(z)` near an elliptic fixed point.

use num_complex::Complex64;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::poly::{self, ActionPolynomial, ChartKind, Evaluator, Polynomial};
use crate::scalar::{ComplexCoeff, RealCoeff};

/// Default domain radius.
pub const DEFAULT_S: f64 = 4.0;

/// `Ĩ_i = ½(z_i² + z_{n+i}²)`.
pub fn formal_actions(n: usize, z: &[f64]) -> Result<Vec<f64>> {
    if z.len() != 2 * n {
        return Err(Error::DimensionMismatch {
            expected: 2 * n,
            got: z.len(),
        });
    }
    Ok((0..n).map(|i| 0.5 * (z[i] * z[i] + z[n + i] * z[n + i])).collect())
}

/// `α·Ĩ` as a phase-space polynomial.
pub fn quadratic_part<R: RealCoeff>(alpha: &[R]) -> Polynomial<R> {
    let n = alpha.len();
    let half = R::from_ratio(1, 2);
    let mut terms = Vec::with_capacity(2 * n);
    for (i, a) in alpha.iter().enumerate() {
        for j in [i, n + i] {
            let mut k = vec![0; 2 * n];
            k[j] = 2;
            terms.push((k, a.clone() * half.clone()));
        }
    }
    Polynomial::from_terms(n, terms).expect("valid quadratic monomials")
}

#[derive(Clone, Debug, PartialEq)]
pub struct EllipticHamiltonian<R: RealCoeff = f64> {
    alpha: Vec<R>,
    v: Polynomial<R>,
    s: f64,
}

impl<R: RealCoeff> EllipticHamiltonian<R> {
    pub fn new(alpha: Vec<R>, v: Polynomial<R>, s: f64) -> Result<Self> {
        let n = alpha.len();
        if n == 0 {
            return Err(Error::invalid("alpha must be non-empty"));
        }
        if v.dimension() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: v.dimension(),
            });
        }
        for i in 0..n {
            for j in i + 1..n {
                if alpha[i] == alpha[j] {
                    return Err(Error::invalid(format!(
                        "alpha components {i} and {j} coincide; distinct frequencies are required"
                    )));
                }
            }
        }
        if let Some(d) = v.min_degree() {
            if d <= 2 {
                return Err(Error::invalid(format!(
                    "V must only contain terms of degree >= 3, found degree {d}"
                )));
            }
        }
        if !(s > 3.0) || !s.is_finite() {
            return Err(Error::invalid(format!("domain radius s must exceed 3, got {s}")));
        }
        Ok(Self { alpha, v, s })
    }

    /// Setting (B): `α·Ĩ + βĨ·Ĩ + f`. The `β` part is placed in `V`.
    pub fn with_beta(alpha: Vec<R>, beta: &[Vec<R>], f: Polynomial<R>, s: f64) -> Result<Self> {
        let n = alpha.len();
        let zero: Vec<R> = vec![R::zero(); n];
        let b = ActionPolynomial::from_quadratic(&zero, Some(beta))?.expand();
        Self::new(alpha, f.checked_add(&b)?, s)
    }

    pub fn dimension(&self) -> usize {
        self.alpha.len()
    }

    pub fn alpha(&self) -> &[R] {
        &self.alpha
    }

    pub fn alpha_f64(&self) -> Vec<f64> {
        self.alpha.iter().map(RealCoeff::as_f64).collect()
    }

    pub fn perturbation(&self) -> &Polynomial<R> {
        &self.v
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    /// `ρ = majorant_norm(V, s)`.
    pub fn rho(&self) -> f64 {
        self.v.majorant_norm(self.s)
    }

    pub fn polynomial(&self) -> Polynomial<R> {
        &quadratic_part(&self.alpha) + &self.v
    }

    /// `ρ^power H(ρ z)` with the frequencies rescaled accordingly
    /// (unchanged for `power = −2`, multiplied by `ρ^{−2}` for `power = −4`).
    pub fn scaled(&self, rho: &R, power: i32) -> Result<Self> {
        let v = self.v.scale_hamiltonian(rho, power)?;
        let alpha = if power == -4 {
            let inv2 = R::one() / (rho.clone() * rho.clone());
            self.alpha.iter().map(|a| a.clone() * inv2.clone()).collect()
        } else {
            self.alpha.clone()
        };
        Self::new(alpha, v, self.s)
    }

    pub fn to_f64(&self) -> EllipticHamiltonian<f64> {
        EllipticHamiltonian {
            alpha: self.alpha_f64(),
            v: self.v.to_f64(),
            s: self.s,
        }
    }

    pub fn evaluator(&self) -> Evaluator {
        Evaluator::new(&self.polynomial())
    }

    pub fn energy(&self, z: &[f64]) -> Result<f64> {
        self.check_point(z)?;
        Ok(self.polynomial().eval_f64(z))
    }

    fn check_point(&self, z: &[f64]) -> Result<()> {
        let n = self.dimension();
        if z.len() != 2 * n {
            return Err(Error::DimensionMismatch {
                expected: 2 * n,
                got: z.len(),
            });
        }
        Ok(())
    }

    /// `(∂H/∂p, −∂H/∂q)`.
    pub fn vector_field(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.check_point(z)?;
        let norm = euclidean_norm(z);
        if norm >= self.s {
            return Err(Error::OutOfDomain {
                norm,
                radius: self.s,
            });
        }
        let mut out = vec![0.0; z.len()];
        self.evaluator().vector_field(z, &mut out);
        Ok(out)
    }

    pub fn to_json(&self) -> Value {
        let alpha: Vec<Value> = self.alpha.iter().map(|a| a.to_json_parts().0).collect();
        json!({
            "n": self.dimension(),
            "alpha": alpha,
            "s": self.s,
            "V": self.v.to_json(),
        })
    }

    /// Reads `{"n", "alpha", "s", "V"}`; `s` defaults to 4.
    pub fn from_json(v: &Value) -> Result<Self> {
        let n = v
            .get("n")
            .and_then(Value::as_u64)
            .ok_or_else(|| Error::invalid("Hamiltonian JSON needs an integer field \"n\""))?
            as usize;
        let alpha_json = v
            .get("alpha")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::invalid("Hamiltonian JSON needs an array field \"alpha\""))?;
        if alpha_json.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: alpha_json.len(),
            });
        }
        let alpha = alpha_json
            .iter()
            .map(|a| {
                R::from_json_parts(a, &Value::Null)
                    .ok_or_else(|| Error::invalid(format!("bad frequency {a}")))
            })
            .collect::<Result<Vec<R>>>()?;
        let s = match v.get("s") {
            None | Some(Value::Null) => DEFAULT_S,
            Some(x) => x
                .as_f64()
                .ok_or_else(|| Error::invalid("\"s\" must be a number"))?,
        };
        let pert = match v.get("V") {
            None | Some(Value::Null) => Polynomial::zero(n),
            Some(p) => Polynomial::from_json(p)?,
        };
        Self::new(alpha, pert, s)
    }
}

pub fn euclidean_norm(z: &[f64]) -> f64 {
    z.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChartDirection {
    ToComplex,
    ToReal,
}

/// Pointwise form of the chart `ζ_j = (z_j − i z_{n+j})/√2`,
/// `ζ̄_j = (z_j + i z_{n+j})/√2`.
#[derive(Clone, Copy, Debug)]
pub struct ComplexChart {
    pub n: usize,
    pub direction: ChartDirection,
}

impl ComplexChart {
    pub fn new(n: usize, direction: ChartDirection) -> Self {
        Self { n, direction }
    }

    pub fn inverse(&self) -> Self {
        let direction = match self.direction {
            ChartDirection::ToComplex => ChartDirection::ToReal,
            ChartDirection::ToReal => ChartDirection::ToComplex,
        };
        Self { n: self.n, direction }
    }

    /// Maps `(q, p)` to `(ζ, ζ̄)` or back.
    pub fn apply(&self, z: &[Complex64]) -> Result<Vec<Complex64>> {
        let n = self.n;
        if z.len() != 2 * n {
            return Err(Error::DimensionMismatch {
                expected: 2 * n,
                got: z.len(),
            });
        }
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let i = Complex64::i();
        let mut out = vec![Complex64::new(0.0, 0.0); 2 * n];
        for j in 0..n {
            let (a, b) = (z[j], z[n + j]);
            match self.direction {
                ChartDirection::ToComplex => {
                    out[j] = (a - i * b) * h;
                    out[n + j] = (a + i * b) * h;
                }
                ChartDirection::ToReal => {
                    out[j] = (a + b) * h;
                    out[n + j] = i * (a - b) * h;
                }
            }
        }
        Ok(out)
    }
}

/// Rewrites `f` in `(ζ, ζ̄)`. Exact fields use `w = q − ip` instead, since
/// `√2` is not rational.
pub fn complexify<R: RealCoeff>(f: &Polynomial<R>) -> Result<Polynomial<R::Complex>> {
    poly::complexify(f, ChartKind::for_field::<R>())
}

/// Inverse of [`complexify`].
pub fn realify<C: ComplexCoeff>(f: &Polynomial<C>) -> Result<Polynomial<C::Real>> {
    poly::realify_real(f, ChartKind::for_field::<C::Real>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{Coeff, Rational};

    #[test]
    fn formal_action_examples() {
        assert_eq!(formal_actions(2, &[1.0, 0.0, 1.0, 0.0]).unwrap(), vec![1.0, 0.0]);
        assert_eq!(formal_actions(2, &[0.0; 4]).unwrap(), vec![0.0, 0.0]);
        let a = formal_actions(1, &[3.0, 4.0]).unwrap();
        assert_eq!(a, vec![12.5]);
        assert!(formal_actions(2, &[1.0]).is_err());
    }

    #[test]
    fn harmonic_vector_field() {
        let h = EllipticHamiltonian::new(vec![1.7], Polynomial::zero(1), 4.0).unwrap();
        let f = h.vector_field(&[0.3, -0.5]).unwrap();
        assert!((f[0] - 1.7 * -0.5).abs() < 1e-15);
        assert!((f[1] + 1.7 * 0.3).abs() < 1e-15);
        assert_eq!(h.vector_field(&[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
        assert!(matches!(h.vector_field(&[4.0, 0.0]), Err(Error::OutOfDomain { .. })));
    }

    #[test]
    fn squared_action_vector_field() {
        // H = Ĩ² = ¼(q²+p²)²: ∂H/∂q = q(q²+p²), so at (1, 0) the field is (0, −1)
        let v = Polynomial::from_terms(1, vec![(vec![4, 0], 0.25), (vec![2, 2], 0.5), (vec![0, 4], 0.25)])
            .unwrap();
        // zero alpha is allowed for n = 1
        let h = EllipticHamiltonian::new(vec![0.0], v, 4.0).unwrap();
        let f = h.vector_field(&[1.0, 0.0]).unwrap();
        assert_eq!(f, vec![0.0, -1.0]);
    }

    #[test]
    fn validation() {
        assert!(EllipticHamiltonian::new(vec![1.0, 1.0], Polynomial::zero(2), 4.0).is_err());
        assert!(EllipticHamiltonian::new(vec![1.0], Polynomial::zero(1), 3.0).is_err());
        let quad = Polynomial::monomial(1, &[1, 1], 1.0).unwrap();
        assert!(EllipticHamiltonian::new(vec![1.0], quad, 4.0).is_err());
        assert!(EllipticHamiltonian::new(vec![1.0, 2.0], Polynomial::zero(1), 4.0).is_err());
    }

    #[test]
    fn json_round_trip() {
        let v = Polynomial::from_terms(2, vec![(vec![3, 0, 0, 0], 0.1), (vec![0, 1, 2, 0], -0.2)]).unwrap();
        let h = EllipticHamiltonian::new(vec![1.0, 1.618], v, 4.0).unwrap();
        let back = EllipticHamiltonian::<f64>::from_json(&h.to_json()).unwrap();
        assert_eq!(back, h);
        assert!((h.rho() - (0.1 * 64.0 + 0.2 * 64.0)).abs() < 1e-12);

        let exact = EllipticHamiltonian::<Rational>::from_json(&json!({
            "n": 1, "alpha": ["1"], "V": {"n": 1, "terms": [{"k": [4, 0], "re": "-3/10"}]}
        }))
        .unwrap();
        assert_eq!(exact.s(), DEFAULT_S);
        assert_eq!(exact.perturbation().coeff_of(&[4, 0]), Rational::from_ratio(-3, 10));
    }

    #[test]
    fn point_chart_round_trip() {
        let z: Vec<Complex64> = [0.3, -1.2, 2.5, 0.01]
            .iter()
            .map(|&x| Complex64::new(x, 0.0))
            .collect();
        let c = ComplexChart::new(2, ChartDirection::ToComplex);
        let w = c.apply(&z).unwrap();
        let back = c.inverse().apply(&w).unwrap();
        for (a, b) in z.iter().zip(&back) {
            assert!((a - b).norm() < 1e-14);
        }
        // ζ ζ̄ = Ĩ at real points
        assert!((w[0] * w[2] - Complex64::new(0.5 * (0.09 + 6.25), 0.0)).norm() < 1e-14);
    }

    #[test]
    fn polynomial_chart_agrees_with_point_chart() {
        let f = Polynomial::from_terms(1, vec![(vec![2, 1], 0.7), (vec![0, 3], -0.2)]).unwrap();
        let c = complexify(&f).unwrap();
        let z = [Complex64::new(0.4, 0.0), Complex64::new(-0.9, 0.0)];
        let w = ComplexChart::new(1, ChartDirection::ToComplex).apply(&z).unwrap();
        let lhs = c.evaluate(&w).unwrap();
        let rhs = f.eval_f64(&[0.4, -0.9]);
        assert!((lhs - Complex64::new(rhs, 0.0)).norm() < 1e-14);
        let back = realify(&c).unwrap();
        for (k, v) in f.terms() {
            assert!((back.coeff_of(&k.to_vec()) - v).abs() < 1e-15);
        }
    }
}
