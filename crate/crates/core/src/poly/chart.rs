//! Complex charts `(q, p) <-> (u, v)` applied pairwise to every degree of
//! freedom. `u_j` plays the role of `ζ_j` and `v_j` of `ζ̄_j`.

use crate::error::{Error, Result};
use crate::scalar::{ComplexCoeff, RealCoeff};

use super::Polynomial;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChartKind {
    /// `ζ = (q − ip)/√2`. Symplectic up to the factor `{ζ, ζ̄} = i`, and
    /// `α·Ĩ = Σ α_j ζ_j ζ̄_j`. Needs `√2`, so float fields only.
    Unitary,
    /// `w = q − ip`. Rational, with `{w, w̄} = 2i` and `α·Ĩ = Σ (α_j/2) w_j w̄_j`.
    Scaled,
}

impl ChartKind {
    /// Default chart for a coefficient field.
    pub fn for_field<R: RealCoeff>() -> Self {
        if R::frac_1_sqrt_2().is_some() {
            ChartKind::Unitary
        } else {
            ChartKind::Scaled
        }
    }

    /// Value of `{u_j, v_j}`.
    pub fn bracket_factor<C: ComplexCoeff>(self) -> C {
        match self {
            ChartKind::Unitary => C::imag_unit(),
            ChartKind::Scaled => C::imag_unit() * C::from_i64(2),
        }
    }

    /// Coefficient of `u_j v_j` in the image of `Ĩ_j`.
    pub fn action_weight<R: RealCoeff>(self) -> R {
        match self {
            ChartKind::Unitary => R::one(),
            ChartKind::Scaled => R::from_ratio(1, 2),
        }
    }

    /// `q = a u + b v`, `p = c u + d v`.
    fn to_complex_map<C: ComplexCoeff>(self) -> Result<[[C; 2]; 2]> {
        let s = self.scale::<C::Real>()?;
        let i = C::imag_unit();
        let s = C::from_real(s);
        Ok([
            [s.clone(), s.clone()],
            [i.clone() * s.clone(), -(i * s)],
        ])
    }

    /// `u = a q + b p`, `v = c q + d p`.
    fn to_real_map<C: ComplexCoeff>(self) -> Result<[[C; 2]; 2]> {
        let s = match self {
            ChartKind::Unitary => C::from_real(self.scale::<C::Real>()?),
            ChartKind::Scaled => C::one(),
        };
        let i = C::imag_unit();
        Ok([
            [s.clone(), -(i.clone() * s.clone())],
            [s.clone(), i * s],
        ])
    }

    fn scale<R: RealCoeff>(self) -> Result<R> {
        match self {
            ChartKind::Unitary => R::frac_1_sqrt_2().ok_or_else(|| {
                Error::invalid("the unitary chart needs sqrt(2); use the scaled chart in exact mode")
            }),
            ChartKind::Scaled => Ok(R::from_ratio(1, 2)),
        }
    }
}

/// Rewrites a real polynomial in the complex chart.
pub fn complexify<R: RealCoeff>(f: &Polynomial<R>, chart: ChartKind) -> Result<Polynomial<R::Complex>> {
    let map = chart.to_complex_map::<R::Complex>()?;
    Ok(f.substitute_pairs(|c| R::Complex::from_real(c.clone()), &map))
}

/// Pulls a chart polynomial back to `(q, p)`. The result has complex
/// coefficients; for images of real functions the imaginary parts vanish.
pub fn realify<C: ComplexCoeff>(f: &Polynomial<C>, chart: ChartKind) -> Result<Polynomial<C>> {
    let map = chart.to_real_map::<C>()?;
    Ok(f.substitute_pairs(|c| c.clone(), &map))
}

/// [`realify`] followed by taking real parts, checking the imaginary parts
/// are negligible.
pub fn realify_real<C: ComplexCoeff>(f: &Polynomial<C>, chart: ChartKind) -> Result<Polynomial<C::Real>> {
    let g = realify(f, chart)?;
    let scale = g.terms().map(|(_, c)| c.magnitude()).sum::<f64>()
        * f64::from(g.max_degree().unwrap_or(0).max(1));
    for (k, c) in g.terms() {
        let im = C::from_real(c.im());
        if !im.is_roundoff(scale) {
            return Err(Error::invalid(format!(
                "polynomial is not real-valued: monomial {:?} has imaginary part {:e}",
                k.to_vec(),
                im.magnitude()
            )));
        }
    }
    Ok(g.real_part())
}

/// The part of `f` that Poisson-commutes with every `Ĩ_j` (its average over
/// all the rotation angles), computed through the scaled chart.
pub fn paired_part<R: RealCoeff>(f: &Polynomial<R>) -> Result<Polynomial<R>> {
    let w = complexify(f, ChartKind::Scaled)?.filter_terms(|k, _| k.is_paired());
    realify_real(&w, ChartKind::Scaled)
}
