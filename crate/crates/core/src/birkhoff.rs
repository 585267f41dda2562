//! Birkhoff normalization `H∘Φ_m = h_m(Ĩ) + f_m` by Lie transforms.
//!
//! Work happens in a complex chart where `α·Ĩ` is diagonal. For each degree
//! `d = 3..2m` the non-paired part of the degree-`d` terms is removed by a
//! generator `χ_d` solving `{χ_d, α·Ĩ} = F_d^{non-paired}`, and the whole
//! Hamiltonian is replaced by `exp(ad_χ_d) H = Σ_j ad^j H / j!` with
//! `ad_χ F = {F, χ}`, truncated at the working degree. Since `H ← H∘φ_d`
//! with `φ_d` the time-one flow of `χ_d`, the full transform is
//! `Φ_m = φ_3 ∘ φ_4 ∘ ... ∘ φ_{2m}`.

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::model::{euclidean_norm, EllipticHamiltonian};
use crate::ode::{self, Tolerance};
use crate::poly::{
    complexify, monomial_count, realify_real, ActionPolynomial, ChartKind,
    Evaluator, Polynomial,
};
use crate::scalar::{Coeff, ComplexCoeff, RealCoeff};

#[derive(Clone, Debug)]
pub struct BirkhoffConfig {
    /// Largest allowed number of monomials of degree `<= D_work`.
    pub term_budget: u128,
    /// Relative divisor floor in float mode (times `max|α_i|`).
    pub divisor_floor_rel: f64,
}

impl Default for BirkhoffConfig {
    fn default() -> Self {
        Self {
            term_budget: 5_000_000,
            divisor_floor_rel: 1e-13,
        }
    }
}

/// Hard ceiling on the working degree.
pub const MAX_D_WORK: u32 = 200;

/// Default working degree for order `m`.
pub fn default_d_work(m: u32) -> u32 {
    2 * m + 4
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

#[derive(Clone, Debug)]
pub struct NormalFormResult<R: RealCoeff> {
    pub m: u32,
    pub d_work: u32,
    pub n: usize,
    pub s: f64,
    pub chart: ChartKind,
    /// Birkhoff polynomial in the formal actions, degree `<= m`.
    pub h_m: ActionPolynomial<R>,
    /// `χ_d` in the complex chart, index `d − 3`.
    pub generators: Vec<Polynomial<R::Complex>>,
    /// `χ_d` pulled back to `(q, p)`.
    pub real_generators: Vec<Polynomial<R>>,
    /// Terms of `H∘Φ_m` with degree in `(2m, D_work]`.
    pub remainder: Polynomial<R>,
    /// `Σ |c_k|` of the degree-`D` part of `H∘Φ_m` for `D = 3..=D_work`.
    pub degree_weights: Vec<(u32, f64)>,
    /// Geometric tail estimate of the discarded degrees on radius `3s/4`.
    pub tail_bound: f64,
    /// Per-degree geometric ratio at radius one used for the tail.
    pub tail_ratio: Option<f64>,
    /// `min |(k−l)·α|` over divisors actually used, with its `k − l`.
    pub smallest_divisor: Option<f64>,
    pub smallest_divisor_k: Option<Vec<i64>>,
    /// Majorant bound for `|Φ_m − Id|` on radius `3s/4`.
    pub transform_displacement: f64,
    flows: Vec<Evaluator>,
}

impl<R: RealCoeff> NormalFormResult<R> {
    pub fn default_radius(&self) -> f64 {
        0.75 * self.s
    }

    /// Tail estimate for degrees above `D_work` on radius `r`.
    pub fn tail_bound_at(&self, r: f64) -> f64 {
        tail_estimate(&self.degree_weights, self.generators.iter().all(Polynomial::is_zero), r).0
    }

    /// `majorant_norm(remainder, r) + tail`.
    pub fn remainder_majorant(&self, r: f64) -> f64 {
        self.remainder.majorant_norm(r) + self.tail_bound_at(r)
    }

    /// Majorant of the remainder's Hamiltonian vector field on radius `r`.
    pub fn remainder_vector_field_majorant(&self, r: f64) -> f64 {
        self.remainder.vector_field_majorant(r)
    }

    /// `Σ_d max_i majorant(∂_i χ_d, r)`.
    pub fn displacement_at(&self, r: f64) -> f64 {
        self.real_generators
            .iter()
            .map(|g| g.vector_field_majorant(r))
            .sum()
    }

    /// `h_m(Ĩ(z)) + remainder(z)`: the transformed Hamiltonian up to the tail.
    pub fn normal_form_value(&self, z: &[f64]) -> f64 {
        let n = self.n;
        let actions: Vec<f64> = (0..n)
            .map(|i| 0.5 * (z[i] * z[i] + z[n + i] * z[n + i]))
            .collect();
        self.h_m.eval_f64(&actions) + self.remainder.eval_f64(z)
    }

    /// Applies `Φ_m` (or its inverse) by integrating the generator flows.
    pub fn apply_transform(&self, z: &[f64], direction: Direction) -> Result<Vec<f64>> {
        if z.len() != 2 * self.n {
            return Err(Error::DimensionMismatch {
                expected: 2 * self.n,
                got: z.len(),
            });
        }
        let norm = euclidean_norm(z);
        if norm > 0.5 * self.s {
            return Err(Error::OutOfDomain {
                norm,
                radius: 0.5 * self.s,
            });
        }
        let mut y = z.to_vec();
        match direction {
            Direction::Forward => {
                for ev in self.flows.iter().rev() {
                    self.flow(ev, &mut y, 1.0)?;
                }
            }
            Direction::Inverse => {
                for ev in &self.flows {
                    self.flow(ev, &mut y, -1.0)?;
                }
            }
        }
        Ok(y)
    }

    fn flow(&self, ev: &Evaluator, y: &mut [f64], t: f64) -> Result<()> {
        let s = self.s;
        ode::integrate(
            |x, out| {
                let norm = euclidean_norm(x);
                if norm >= s {
                    return Err(Error::OutOfDomain { norm, radius: s });
                }
                ev.vector_field(x, out);
                Ok(())
            },
            y,
            t,
            Tolerance::default(),
        )?;
        Ok(())
    }

    /// Coefficients of `h_m` as `(k, c)` rows.
    pub fn invariant_table(&self) -> Vec<(Vec<u32>, f64)> {
        self.h_m
            .terms()
            .map(|(k, c)| (k.to_vec(), c.as_f64()))
            .collect()
    }

    pub fn to_json(&self, radius: f64) -> Value {
        let invariants: Vec<Value> = self
            .h_m
            .terms()
            .map(|(k, c)| json!({"k": k.to_vec(), "coefficient": c.to_json_parts().0}))
            .collect();
        json!({
            "m": self.m,
            "D_work": self.d_work,
            "n": self.n,
            "s": self.s,
            "chart": self.chart,
            "radius": radius,
            "h_m": self.h_m.to_json(),
            "invariants": invariants,
            "remainder_majorant": finite_or_null(self.remainder_majorant(radius)),
            "remainder_terms_majorant": self.remainder.majorant_norm(radius),
            "tail_bound": finite_or_null(self.tail_bound_at(radius)),
            "tail_ratio": self.tail_ratio,
            "smallest_divisor": self.smallest_divisor,
            "smallest_divisor_k": self.smallest_divisor_k,
            "transform_displacement": finite_or_null(self.displacement_at(radius)),
            "generators": self.real_generators.iter().map(Polynomial::to_json).collect::<Vec<_>>(),
        })
    }
}

fn finite_or_null(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

/// `(tail, ratio)`: geometric extrapolation from the two highest nonzero
/// degrees.
fn tail_estimate(weights: &[(u32, f64)], untouched: bool, r: f64) -> (f64, Option<f64>) {
    if untouched {
        // no generator was applied, so nothing was discarded
        return (0.0, None);
    }
    let nonzero: Vec<&(u32, f64)> = weights.iter().filter(|(_, w)| *w > 0.0).collect();
    match nonzero.as_slice() {
        [] => (0.0, None),
        [_] => (f64::INFINITY, None),
        [.., (d0, w0), (d1, w1)] => {
            let unit_ratio = (w1 / w0).powf(1.0 / f64::from(d1 - d0));
            let q = unit_ratio * r;
            if q >= 1.0 {
                (f64::INFINITY, Some(unit_ratio))
            } else {
                (w1 * r.powi(*d1 as i32) * q / (1.0 - q), Some(unit_ratio))
            }
        }
    }
}

struct Engine<R: RealCoeff> {
    n: usize,
    alpha: Vec<R>,
    exact_floor: bool,
    floor: f64,
    chart: ChartKind,
    factor: R::Complex,
    h: Polynomial<R::Complex>,
    d_work: u32,
    generators: Vec<Polynomial<R::Complex>>,
    smallest: Option<(f64, Vec<i64>)>,
}

impl<R: RealCoeff> Engine<R> {
    fn new(ham: &EllipticHamiltonian<R>, d_work: u32, cfg: &BirkhoffConfig) -> Result<Self> {
        let n = ham.dimension();
        if d_work > MAX_D_WORK {
            return Err(Error::OrderTooHigh {
                d_work,
                terms: monomial_count(2 * n, d_work),
                budget: cfg.term_budget,
            });
        }
        let terms = monomial_count(2 * n, d_work);
        if terms > cfg.term_budget {
            return Err(Error::OrderTooHigh {
                d_work,
                terms,
                budget: cfg.term_budget,
            });
        }
        let chart = ChartKind::for_field::<R>();
        let weight: R = chart.action_weight();
        let mut quad = Vec::with_capacity(n);
        for (j, a) in ham.alpha().iter().enumerate() {
            let mut k = vec![0; 2 * n];
            k[j] = 1;
            k[n + j] = 1;
            quad.push((k, R::Complex::from_real(a.clone() * weight.clone())));
        }
        let h2 = Polynomial::from_terms(n, quad)?;
        let v = complexify(ham.perturbation(), chart)?.truncate_by_degree(3, d_work);
        let amax = ham.alpha_f64().iter().fold(0.0_f64, |m, a| m.max(a.abs()));
        Ok(Self {
            n,
            alpha: ham.alpha().to_vec(),
            exact_floor: R::EXACT,
            floor: cfg.divisor_floor_rel * amax,
            chart,
            factor: chart.bracket_factor(),
            h: &h2 + &v,
            d_work,
            generators: Vec::new(),
            smallest: None,
        })
    }

    fn step(&mut self, d: u32) -> Result<()> {
        let part = self.h.homogeneous_part(d);
        let mut chi_terms = Vec::new();
        for (k, c) in part.terms() {
            if k.is_paired() {
                continue;
            }
            let diff = k.pair_difference();
            let mut lambda = R::zero();
            for (dj, a) in diff.iter().zip(&self.alpha) {
                if *dj != 0 {
                    lambda += a.clone() * R::from_i64(*dj);
                }
            }
            let mag = lambda.as_f64().abs();
            let resonant = if self.exact_floor {
                lambda.is_zero()
            } else {
                mag <= self.floor
            };
            if resonant {
                return Err(Error::ResonanceEncountered {
                    degree: d,
                    k: diff,
                    divisor: mag,
                });
            }
            if self.smallest.as_ref().is_none_or(|(m, _)| mag < *m) {
                self.smallest = Some((mag, diff));
            }
            // c / (i λ) = −i c / λ
            let inv = R::Complex::from_parts(R::zero(), -(R::one() / lambda));
            chi_terms.push((k.to_vec(), c.clone() * inv));
        }
        let chi = Polynomial::from_terms(self.n, chi_terms)?;
        self.generators.push(chi.clone());
        if chi.is_zero() {
            return Ok(());
        }
        let lift = d - 2;
        let mut result = self.h.clone();
        let mut term = self.h.clone();
        let mut j: i64 = 1;
        while self.d_work >= lift {
            let cut = term.truncate_by_degree(0, self.d_work - lift);
            if cut.is_zero() {
                break;
            }
            let b = cut.bracket_in_chart(&chi, &self.factor, self.d_work)?;
            term = b.scale(&R::Complex::from_ratio(1, j));
            if term.is_zero() {
                break;
            }
            result = &result + &term;
            j += 1;
        }
        // the non-paired degree-d terms cancel; in float mode drop the rounding residue
        debug_assert!(
            !R::EXACT || result.homogeneous_part(d).terms().all(|(k, _)| k.is_paired())
        );
        self.h = result.filter_terms(|k, _| k.degree() != d || k.is_paired());
        Ok(())
    }

    /// Reads a paired chart polynomial as a function of `Ĩ`: `u_j v_j` is
    /// `Ĩ_j / weight`.
    fn action_form(&self, normal: &Polynomial<R::Complex>) -> Result<ActionPolynomial<R>> {
        let scale = normal.terms().map(|(_, c)| c.magnitude()).sum::<f64>();
        let inv_weight = R::one() / self.chart.action_weight::<R>();
        let mut terms = Vec::with_capacity(normal.len());
        for (k, c) in normal.terms() {
            if !R::Complex::from_real(c.im()).is_roundoff(scale) {
                return Err(Error::NotActionRepresentable {
                    monomial: k.to_vec(),
                });
            }
            let mut coef = c.re();
            for _ in 0..k.degree() / 2 {
                coef *= inv_weight.clone();
            }
            terms.push((k.q_part().iter().map(|&e| u32::from(e)).collect(), coef));
        }
        ActionPolynomial::from_terms(self.n, terms)
    }

    /// Assembles the result for order `m` using degrees `<= d_snap`.
    fn snapshot(&self, m: u32, d_snap: u32, s: f64) -> Result<NormalFormResult<R>> {
        let n = self.n;
        let full = self.h.truncate_by_degree(0, d_snap);
        let normal = full.truncate_by_degree(0, 2 * m);
        for (k, _) in normal.terms() {
            debug_assert!(k.is_paired());
            if !k.is_paired() {
                return Err(Error::invalid(format!(
                    "internal: non-normalized monomial {:?} below order 2m",
                    k.to_vec()
                )));
            }
        }
        let h_m = self.action_form(&normal)?;
        let remainder = realify_real(&full.truncate_by_degree(2 * m + 1, d_snap), self.chart)?;
        let full_real = realify_real(&full.truncate_by_degree(3, d_snap), self.chart)?;
        let degree_weights: Vec<(u32, f64)> = (3..=d_snap)
            .map(|d| (d, full_real.homogeneous_part(d).majorant_norm(1.0)))
            .collect();
        let generators: Vec<Polynomial<R::Complex>> =
            self.generators[..(2 * m).saturating_sub(2) as usize].to_vec();
        let real_generators = generators
            .iter()
            .map(|g| realify_real(g, self.chart))
            .collect::<Result<Vec<_>>>()?;
        let untouched = generators.iter().all(Polynomial::is_zero);
        let radius = 0.75 * s;
        let (tail_bound, tail_ratio) = tail_estimate(&degree_weights, untouched, radius);
        let transform_displacement = real_generators
            .iter()
            .map(|g| g.vector_field_majorant(radius))
            .sum();
        let flows = real_generators.iter().map(Evaluator::new).collect();
        let (smallest_divisor, smallest_divisor_k) = match &self.smallest {
            Some((v, k)) => (Some(*v), Some(k.clone())),
            None => (None, None),
        };
        Ok(NormalFormResult {
            m,
            d_work: d_snap,
            n,
            s,
            chart: self.chart,
            h_m,
            generators,
            real_generators,
            remainder,
            degree_weights,
            tail_bound,
            tail_ratio,
            smallest_divisor,
            smallest_divisor_k,
            transform_displacement,
            flows,
        })
    }
}

/// Normalizes `H` to order `2m` with working degree `d_work`
/// (default `2m + 4`).
pub fn birkhoff_normal_form<R: RealCoeff>(
    ham: &EllipticHamiltonian<R>,
    m: u32,
    d_work: Option<u32>,
    cfg: &BirkhoffConfig,
) -> Result<NormalFormResult<R>> {
    if m == 0 {
        return Err(Error::invalid("order m must be at least 1"));
    }
    let d_work = d_work.unwrap_or_else(|| default_d_work(m));
    if d_work < 2 * m + 1 {
        return Err(Error::invalid(format!(
            "D_work = {d_work} must be at least 2m + 1 = {}",
            2 * m + 1
        )));
    }
    let mut eng = Engine::new(ham, d_work, cfg)?;
    for d in 3..=2 * m {
        eng.step(d)?;
    }
    eng.snapshot(m, d_work, ham.s())
}

/// Normal forms for every `m` in `m_min..=m_max` from one run with working
/// degree `2 m_max + 4`. Each entry equals what
/// [`birkhoff_normal_form`] returns with `D_work = 2m + 4`.
pub fn normal_form_family<R: RealCoeff>(
    ham: &EllipticHamiltonian<R>,
    m_min: u32,
    m_max: u32,
    cfg: &BirkhoffConfig,
) -> Result<Vec<NormalFormResult<R>>> {
    if m_min == 0 || m_min > m_max {
        return Err(Error::invalid("need 1 <= m_min <= m_max"));
    }
    let mut eng = Engine::new(ham, default_d_work(m_max), cfg)?;
    let mut out = Vec::new();
    for m in 1..=m_max {
        if m >= 2 {
            eng.step(2 * m - 1)?;
            eng.step(2 * m)?;
        }
        if m >= m_min {
            out.push(eng.snapshot(m, default_d_work(m), ham.s())?);
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct RemainderPoint {
    pub m: u32,
    pub d_work: u32,
    pub remainder_majorant: f64,
    pub tail_bound: f64,
    pub smallest_divisor: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct RemainderCurve {
    pub radius: f64,
    pub points: Vec<RemainderPoint>,
    /// Order with the smallest remainder majorant (first on ties).
    pub best_m: u32,
    pub best_remainder: f64,
}

/// Remainder majorant on `radius` for `m = 2..=m_max`.
pub fn remainder_curve<R: RealCoeff>(
    ham: &EllipticHamiltonian<R>,
    m_max: u32,
    radius: f64,
    cfg: &BirkhoffConfig,
) -> Result<RemainderCurve> {
    if m_max < 2 {
        return Err(Error::invalid("m_max must be at least 2"));
    }
    if !(radius > 0.0) {
        return Err(Error::invalid("radius must be positive"));
    }
    let family = normal_form_family(ham, 2, m_max, cfg)?;
    let points: Vec<RemainderPoint> = family
        .iter()
        .map(|r| RemainderPoint {
            m: r.m,
            d_work: r.d_work,
            remainder_majorant: r.remainder_majorant(radius),
            tail_bound: r.tail_bound_at(radius),
            smallest_divisor: r.smallest_divisor,
        })
        .collect();
    let mut best = &points[0];
    for p in &points {
        if p.remainder_majorant < best.remainder_majorant {
            best = p;
        }
    }
    Ok(RemainderCurve {
        radius,
        best_m: best.m,
        best_remainder: best.remainder_majorant,
        points,
    })
}

/// `max(2, ⌈c_opt (γ/ρ)^{1/(τ+1)}⌉)`.
pub fn optimal_order(rho: f64, gamma: f64, tau: f64, c_opt: f64) -> Result<u32> {
    if !(rho > 0.0) || !(gamma > 0.0) {
        return Err(Error::invalid("rho and gamma must be positive"));
    }
    if rho >= gamma {
        return Err(Error::ThresholdViolation(format!(
            "rho = {rho} is not below gamma = {gamma}"
        )));
    }
    let m = (c_opt * (gamma / rho).powf(1.0 / (tau + 1.0))).ceil();
    Ok((m as u32).max(2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Rational;

    fn r(p: i64, q: i64) -> Rational {
        Rational::from_ratio(p, q)
    }

    #[test]
    fn harmonic_is_already_normal() {
        let h = EllipticHamiltonian::new(vec![1.0, 1.618], Polynomial::zero(2), 4.0).unwrap();
        let res = birkhoff_normal_form(&h, 3, None, &BirkhoffConfig::default()).unwrap();
        assert_eq!(res.h_m.coeff_of(&[1, 0]), 1.0);
        assert_eq!(res.h_m.coeff_of(&[0, 1]), 1.618);
        assert_eq!(res.h_m.len(), 2);
        assert!(res.generators.iter().all(Polynomial::is_zero));
        assert!(res.remainder.is_zero());
        assert_eq!(res.tail_bound, 0.0);
        assert_eq!(res.smallest_divisor, None);
    }

    #[test]
    fn quartic_oscillator_exact() {
        for c in [r(1, 1), r(-3, 10)] {
            let v = Polynomial::monomial(1, &[4, 0], c.clone()).unwrap();
            let h = EllipticHamiltonian::new(vec![r(1, 1)], v, 4.0).unwrap();
            let res = birkhoff_normal_form(&h, 2, None, &BirkhoffConfig::default()).unwrap();
            let expected =
                ActionPolynomial::from_terms(1, vec![(vec![1], r(1, 1)), (vec![2], c * r(3, 2))])
                    .unwrap();
            assert_eq!(res.h_m, expected);
        }
    }

    #[test]
    fn action_function_is_kept() {
        // V = Ĩ₁ Ĩ₂
        let v = ActionPolynomial::from_terms(2, vec![(vec![1, 1], r(1, 1))]).unwrap().expand();
        let h = EllipticHamiltonian::new(vec![r(1, 1), r(3, 2)], v, 4.0).unwrap();
        let res = birkhoff_normal_form(&h, 3, None, &BirkhoffConfig::default()).unwrap();
        assert!(res.generators.iter().all(Polynomial::is_zero));
        assert_eq!(res.h_m.coeff_of(&[1, 1]), r(1, 1));
        assert_eq!(res.h_m.len(), 3);
    }

    #[test]
    fn resonance_is_reported() {
        // α = (1, 2) with q₁² q₂ excites k − l = (−2, 1)... or its multiples
        let v = Polynomial::monomial(2, &[2, 1, 0, 0], 1.0).unwrap();
        let h = EllipticHamiltonian::new(vec![1.0, 2.0], v, 4.0).unwrap();
        let err = birkhoff_normal_form(&h, 2, None, &BirkhoffConfig::default()).unwrap_err();
        assert!(matches!(err, Error::ResonanceEncountered { degree: 3, .. }));
    }

    #[test]
    fn order_too_high() {
        let h = EllipticHamiltonian::new(vec![1.0, 1.618, 2.3], Polynomial::zero(3), 4.0).unwrap();
        let cfg = BirkhoffConfig {
            term_budget: 1000,
            ..BirkhoffConfig::default()
        };
        assert!(matches!(
            birkhoff_normal_form(&h, 4, None, &cfg),
            Err(Error::OrderTooHigh { .. })
        ));
    }

    #[test]
    fn optimal_order_examples() {
        assert_eq!(optimal_order(0.25, 1.0, 1.0, 1.0).unwrap(), 2);
        assert_eq!(optimal_order(0.999, 1.0, 1.0, 1.0).unwrap(), 2);
        assert_eq!(optimal_order(1e-4, 1.0, 1.0, 1.0).unwrap(), 100);
        assert!(matches!(optimal_order(1.0, 1.0, 1.0, 1.0), Err(Error::ThresholdViolation(_))));
    }

    #[test]
    fn tail_extrapolation() {
        let w = vec![(3, 0.0), (4, 1.0), (5, 0.0), (6, 0.25)];
        let (t, q) = tail_estimate(&w, false, 1.0);
        assert_eq!(q, Some(0.5));
        assert!((t - 0.25).abs() < 1e-15);
        assert!(tail_estimate(&w, false, 2.0).0.is_infinite());
        assert!(tail_estimate(&[(3, 1.0)], false, 1.0).0.is_infinite());
    }
}
