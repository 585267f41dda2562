//! Seeded random Hamiltonians `α·Ĩ + βĨ·Ĩ + V`.
//!
//! Streams of [`CounterRng`] are fixed per ingredient (0: frequencies,
//! 1: `β`, 2: `V`), and every candidate monomial consumes the same two draws
//! whether it is kept or not. Changing `density` therefore never reshuffles
//! the coefficients of the monomials that survive.

use num_bigint::BigInt;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{EllipticHamiltonian, DEFAULT_S};
use crate::poly::{paired_part, MultiIndex, Polynomial};
use crate::scalar::{Rational, RealCoeff};

use super::rng::CounterRng;

const STREAM_ALPHA: u64 = 0;
const STREAM_BETA: u64 = 1;
const STREAM_V: u64 = 2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum AlphaMode {
    Explicit { alpha: Vec<f64> },
    /// Independent uniforms on `(0, 1]`.
    RandomUnitBox,
    /// `(1, θ, .., θ^{n-1})` with `θ` the real root `> 1` of `x^n = x + 1`.
    GoldenFamily,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaSpec {
    Matrix(Vec<Vec<f64>>),
    /// Symmetric with independent entries uniform on `[-1, 1]`.
    Random,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomHamiltonianParams {
    pub n: usize,
    pub alpha_mode: AlphaMode,
    /// Lowest degree of `V` (at least 3).
    #[serde(default = "default_degree_min")]
    pub degree_min: u32,
    #[serde(default = "default_degree_max")]
    pub degree_max: u32,
    #[serde(default = "default_scale")]
    pub coefficient_scale: f64,
    /// Probability that a candidate monomial is kept.
    #[serde(default = "default_density")]
    pub density: f64,
    #[serde(default)]
    pub include_beta: Option<BetaSpec>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_s")]
    pub s: f64,
}

fn default_degree_min() -> u32 {
    3
}
fn default_degree_max() -> u32 {
    4
}
fn default_scale() -> f64 {
    1.0
}
fn default_density() -> f64 {
    0.5
}
fn default_s() -> f64 {
    DEFAULT_S
}

impl RandomHamiltonianParams {
    pub fn new(n: usize, alpha_mode: AlphaMode, seed: u64) -> Self {
        Self {
            n,
            alpha_mode,
            degree_min: default_degree_min(),
            degree_max: default_degree_max(),
            coefficient_scale: default_scale(),
            density: default_density(),
            include_beta: None,
            seed,
            s: default_s(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.n > 8 {
            return Err(Error::invalid(format!("n = {} out of range 1..=8", self.n)));
        }
        if !(3..=40).contains(&self.degree_max) {
            return Err(Error::invalid("degree_max must lie in 3..=40"));
        }
        if self.degree_min < 3 || self.degree_min > self.degree_max {
            return Err(Error::invalid("degree_min must lie in 3..=degree_max"));
        }
        if !(self.coefficient_scale >= 0.0) || !self.coefficient_scale.is_finite() {
            return Err(Error::invalid("coefficient_scale must be finite and non-negative"));
        }
        if !(self.density > 0.0 && self.density <= 1.0) {
            return Err(Error::invalid("density must lie in (0, 1]"));
        }
        if let AlphaMode::Explicit { alpha } = &self.alpha_mode {
            if alpha.len() != self.n {
                return Err(Error::DimensionMismatch {
                    expected: self.n,
                    got: alpha.len(),
                });
            }
        }
        if let Some(BetaSpec::Matrix(b)) = &self.include_beta {
            check_symmetric(b, self.n)?;
        }
        Ok(())
    }
}

fn check_symmetric(b: &[Vec<f64>], n: usize) -> Result<()> {
    if b.len() != n || b.iter().any(|r| r.len() != n) {
        return Err(Error::invalid(format!("beta must be {n}x{n}")));
    }
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in 0..i {
            worst = worst.max((b[i][j] - b[j][i]).abs());
        }
    }
    if worst > 1e-12 {
        return Err(Error::NonSymmetric(worst));
    }
    Ok(())
}

/// Real root `> 1` of `x^n = x + 1` (`n >= 2`).
pub fn golden_root(n: usize) -> f64 {
    assert!(n >= 2);
    let mut x = 1.5_f64;
    for _ in 0..100 {
        let f = x.powi(n as i32) - x - 1.0;
        let df = n as f64 * x.powi(n as i32 - 1) - 1.0;
        let next = x - f / df;
        if (next - x).abs() <= 1e-16 * x {
            return next;
        }
        x = next;
    }
    x
}

pub fn golden_frequencies(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    let theta = golden_root(n);
    (0..n).map(|j| theta.powi(j as i32)).collect()
}

/// Last continued-fraction convergent of `x` with denominator `<= max_den`.
pub fn convergent(x: f64, max_den: i64) -> Rational {
    let (mut h0, mut h1) = (BigInt::zero(), BigInt::one());
    let (mut k0, mut k1) = (BigInt::one(), BigInt::zero());
    let mut r = x;
    for _ in 0..64 {
        let a = r.floor();
        let ab = BigInt::from(a as i64);
        let h2 = &ab * &h1 + &h0;
        let k2 = &ab * &k1 + &k0;
        if k2 > BigInt::from(max_den) {
            break;
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        let frac = r - a;
        if frac < 1e-15 {
            break;
        }
        r = 1.0 / frac;
    }
    Rational::new(h1, k1)
}

/// Round to the nearest multiple of `1/den`.
pub fn to_grid(x: f64, den: i64) -> Rational {
    Rational::new(BigInt::from((x * den as f64).round() as i64), BigInt::from(den))
}

/// Raw float ingredients drawn from the streams.
struct Draw {
    alpha: Vec<f64>,
    beta: Option<Vec<Vec<f64>>>,
    terms: Vec<(MultiIndex, f64)>,
}

fn draw(p: &RandomHamiltonianParams) -> Result<Draw> {
    p.validate()?;
    let n = p.n;
    let alpha = match &p.alpha_mode {
        AlphaMode::Explicit { alpha } => alpha.clone(),
        AlphaMode::RandomUnitBox => {
            let mut rng = CounterRng::new(p.seed, STREAM_ALPHA);
            (0..n).map(|_| 1.0 - rng.next_f64()).collect()
        }
        AlphaMode::GoldenFamily => golden_frequencies(n),
    };
    let beta = match &p.include_beta {
        None => None,
        Some(BetaSpec::Matrix(b)) => Some(b.clone()),
        Some(BetaSpec::Random) => {
            let mut rng = CounterRng::new(p.seed, STREAM_BETA);
            let mut b = vec![vec![0.0; n]; n];
            for i in 0..n {
                for j in i..n {
                    let x = rng.uniform(-1.0, 1.0);
                    b[i][j] = x;
                    b[j][i] = x;
                }
            }
            Some(b)
        }
    };
    let mut rng = CounterRng::new(p.seed, STREAM_V);
    let mut terms = Vec::new();
    for d in p.degree_min..=p.degree_max {
        for k in MultiIndex::all_of_degree(2 * n, d) {
            let keep = rng.next_f64() < p.density;
            let c = rng.uniform(-1.0, 1.0) * p.coefficient_scale;
            if keep && c != 0.0 {
                terms.push((k, c));
            }
        }
    }
    Ok(Draw { alpha, beta, terms })
}

fn assemble<R: RealCoeff>(
    p: &RandomHamiltonianParams,
    alpha: Vec<R>,
    beta: Option<Vec<Vec<R>>>,
    terms: Vec<(MultiIndex, R)>,
) -> Result<EllipticHamiltonian<R>> {
    let n = p.n;
    let v = Polynomial::from_terms(n, terms.into_iter().map(|(k, c)| (k.to_vec(), c)))?;
    match beta {
        None => EllipticHamiltonian::new(alpha, v, p.s),
        Some(b) => {
            // the paired quartic part is β alone, so it reads back exactly
            let f = v.checked_sub(&paired_part(&v.homogeneous_part(4))?)?;
            EllipticHamiltonian::with_beta(alpha, &b, f, p.s)
        }
    }
}

/// Deterministic in `params`. Coefficients are uniform on
/// `[-coefficient_scale, coefficient_scale]` over a random support of
/// degrees `degree_min..=degree_max`; a requested `β` is the whole paired quartic
/// part, so [`crate::poly::to_action_form`] of that part returns `βĨ·Ĩ`.
pub fn generate_random_hamiltonian(p: &RandomHamiltonianParams) -> Result<EllipticHamiltonian> {
    let d = draw(p)?;
    assemble(p, d.alpha, d.beta, d.terms)
}

/// Grids used to move a generated Hamiltonian to exact arithmetic.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExactGrid {
    /// Coefficients of `V` and `β` are rounded to multiples of `1/coefficient_den`.
    pub coefficient_den: i64,
    /// Frequencies become continued-fraction convergents with denominator
    /// at most this (the golden ratio gives 233/144 at the default).
    pub alpha_max_den: i64,
}

impl Default for ExactGrid {
    fn default() -> Self {
        Self {
            coefficient_den: 1024,
            alpha_max_den: 144,
        }
    }
}

/// Rational counterpart of [`generate_random_hamiltonian`] from the same draws.
pub fn generate_random_hamiltonian_exact(
    p: &RandomHamiltonianParams,
    grid: ExactGrid,
) -> Result<EllipticHamiltonian<Rational>> {
    if grid.coefficient_den < 1 || grid.alpha_max_den < 1 {
        return Err(Error::invalid("grid denominators must be positive"));
    }
    let d = draw(p)?;
    let alpha = d.alpha.iter().map(|&a| convergent(a, grid.alpha_max_den)).collect();
    let beta = d.beta.map(|b| {
        b.iter()
            .map(|row| row.iter().map(|&x| to_grid(x, grid.coefficient_den)).collect())
            .collect()
    });
    let terms = d
        .terms
        .into_iter()
        .map(|(k, c)| (k, to_grid(c, grid.coefficient_den)))
        .collect();
    assemble(p, alpha, beta, terms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::to_action_form;

    fn params() -> RandomHamiltonianParams {
        RandomHamiltonianParams::new(2, AlphaMode::GoldenFamily, 11)
    }

    #[test]
    fn zero_scale_gives_harmonic() {
        let mut p = params();
        p.coefficient_scale = 0.0;
        assert!(generate_random_hamiltonian(&p).unwrap().perturbation().is_zero());
    }

    #[test]
    fn same_seed_same_hamiltonian() {
        let p = params();
        let a = generate_random_hamiltonian(&p).unwrap();
        assert_eq!(a, generate_random_hamiltonian(&p).unwrap());
        let mut q = p.clone();
        q.seed = 12;
        assert_ne!(a, generate_random_hamiltonian(&q).unwrap());
    }

    #[test]
    fn beta_round_trip() {
        let mut p = params();
        p.include_beta = Some(BetaSpec::Matrix(vec![vec![1.0, 0.0], vec![0.0, 1.0]]));
        let h = generate_random_hamiltonian(&p).unwrap();
        let quartic = paired_part(&h.perturbation().homogeneous_part(4)).unwrap();
        let a = to_action_form(&quartic).unwrap();
        assert!((a.coeff_of(&[2, 0]) - 1.0).abs() < 1e-13);
        assert!((a.coeff_of(&[0, 2]) - 1.0).abs() < 1e-13);
        assert!(a.coeff_of(&[1, 1]).abs() < 1e-13);
    }

    #[test]
    fn beta_round_trip_exact() {
        let mut p = params();
        p.include_beta = Some(BetaSpec::Random);
        let h = generate_random_hamiltonian_exact(&p, ExactGrid::default()).unwrap();
        let quartic = paired_part(&h.perturbation().homogeneous_part(4)).unwrap();
        let a = to_action_form(&quartic).unwrap();
        // off-diagonal β_ij appears twice in βĨ·Ĩ
        let mut rng = CounterRng::new(p.seed, STREAM_BETA);
        let b00 = to_grid(rng.uniform(-1.0, 1.0), 1024);
        let b01 = to_grid(rng.uniform(-1.0, 1.0), 1024);
        assert_eq!(a.coeff_of(&[2, 0]), b00);
        assert_eq!(a.coeff_of(&[1, 1]), b01 * Rational::from_integer(2.into()));
    }

    #[test]
    fn golden_frequencies_and_convergent() {
        let g = golden_frequencies(2);
        assert!((g[1] - (1.0 + 5f64.sqrt()) / 2.0).abs() < 1e-15);
        assert_eq!(convergent(g[1], 144), Rational::new(233.into(), 144.into()));
        assert_eq!(golden_frequencies(1), vec![1.0]);
        let t = golden_root(3);
        assert!((t.powi(3) - t - 1.0).abs() < 1e-14);
        let p = RandomHamiltonianParams::new(2, AlphaMode::GoldenFamily, 0);
        let h = generate_random_hamiltonian_exact(&p, ExactGrid::default()).unwrap();
        assert_eq!(h.alpha()[1], Rational::new(233.into(), 144.into()));
    }

    #[test]
    fn density_only_thins_the_support() {
        let mut p = params();
        p.density = 1.0;
        let full = generate_random_hamiltonian(&p).unwrap();
        p.density = 0.3;
        let thin = generate_random_hamiltonian(&p).unwrap();
        assert!(thin.perturbation().len() < full.perturbation().len());
        for (k, c) in thin.perturbation().terms() {
            assert_eq!(full.perturbation().coefficient(k), Some(c));
        }
    }

    #[test]
    fn params_serde_round_trip() {
        let mut p = params();
        p.include_beta = Some(BetaSpec::Random);
        let s = serde_json::to_string(&p).unwrap();
        let back: RandomHamiltonianParams = serde_json::from_str(&s).unwrap();
        assert_eq!(p, back);
        let q: RandomHamiltonianParams =
            serde_json::from_str(r#"{"n":1,"alpha_mode":{"mode":"random_unit_box"}}"#).unwrap();
        assert_eq!(q.degree_max, 4);
    }
}
