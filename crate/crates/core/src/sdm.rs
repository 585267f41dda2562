//! Rational subspaces `G^L(n,k)` and the Simultaneous Diophantine Morse
//! (SDM) condition.
//!
//! A `k`-dimensional `Λ ⊂ R^n` lies in `G^L(n,k)` when `Λ^⊥` is spanned by
//! integer vectors with entries in `[−L, L]`. The sets are nested in `L`, and
//! every check here uses the smallest such `L` (the subspace's height),
//! which is where the threshold `γ' L^{−τ'}` is largest.
//!
//! Conventions: for `h(I) = α·I + βI·I` the restricted form is `β_Λ = EᵀβE`
//! with `E` the orthonormal basis of `Λ`; for general `h` the curvature
//! tested is `½ Eᵀ∇²h E`, which equals `β_Λ` in the quadratic case.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, SymmetricEigen};
use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{Signed, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lab::rng::CounterRng;
use crate::poly::ActionPolynomial;

/// Default cap on candidate generator tuples.
pub const DEFAULT_CANDIDATE_CAP: u128 = 10_000_000;

type Q = Ratio<i128>;

/// Reduced row echelon form of the rational span of the perp generators.
/// Two generator sets give the same key iff they span the same subspace.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CanonicalKey(Vec<Vec<(i128, i128)>>);

impl CanonicalKey {
    pub fn rows(&self) -> &[Vec<(i128, i128)>] {
        &self.0
    }
}

impl std::fmt::Display for CanonicalKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let rows: Vec<String> = self
            .0
            .iter()
            .map(|r| {
                let cells: Vec<String> = r
                    .iter()
                    .map(|&(p, q)| if q == 1 { p.to_string() } else { format!("{p}/{q}") })
                    .collect();
                format!("[{}]", cells.join(","))
            })
            .collect();
        write!(f, "[{}]", rows.join(","))
    }
}

#[derive(Clone, Debug)]
pub struct RationalSubspace {
    pub n: usize,
    pub k: usize,
    /// Smallest `L` with `Λ ∈ G^L(n,k)`.
    pub height: u32,
    /// `n − k` independent integer generators of `Λ^⊥`, each primitive with
    /// first nonzero entry positive.
    pub perp_basis: Vec<Vec<i64>>,
    /// Orthonormal basis of `Λ` (rows).
    pub e_basis: Vec<Vec<f64>>,
    /// Orthonormal basis of `Λ^⊥` (rows).
    pub f_basis: Vec<Vec<f64>>,
    pub key: CanonicalKey,
}

impl RationalSubspace {
    /// Orthogonal projector `EEᵀ` onto `Λ`.
    pub fn projector(&self) -> DMatrix<f64> {
        let e = self.e_matrix();
        &e * e.transpose()
    }

    /// `n × k` matrix with the `e_basis` as columns.
    pub fn e_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.k, |i, j| self.e_basis[j][i])
    }

    /// `EᵀME`.
    pub fn restrict(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let e = self.e_matrix();
        e.transpose() * m * e
    }
}

fn gcd_vec(v: &[i64]) -> i64 {
    v.iter().fold(0i64, |g, &x| g.gcd(&x))
}

/// Nonzero primitive vectors with entries in `[−L, L]` and first nonzero
/// entry positive, in lexicographic order.
pub fn primitive_vectors(n: usize, l: u32) -> Vec<Vec<i64>> {
    let l = i64::from(l);
    let side = (2 * l + 1) as usize;
    let total = side.pow(n as u32);
    let mut out = Vec::new();
    let mut v = vec![0i64; n];
    for idx in 0..total {
        let mut r = idx;
        for slot in v.iter_mut().rev() {
            *slot = (r % side) as i64 - l;
            r /= side;
        }
        let first = v.iter().find(|&&x| x != 0);
        if first.is_some_and(|&x| x > 0) && gcd_vec(&v) == 1 {
            out.push(v.clone());
        }
    }
    out
}

/// Canonical key of the span, or `None` when the rows are dependent.
pub fn canonical_key(rows: &[Vec<i64>]) -> Option<CanonicalKey> {
    let n = rows.first().map_or(0, Vec::len);
    let mut m: Vec<Vec<Q>> = rows
        .iter()
        .map(|r| r.iter().map(|&x| Q::from_integer(i128::from(x))).collect())
        .collect();
    let mut rank = 0;
    for c in 0..n {
        let Some(p) = (rank..m.len()).find(|&i| !m[i][c].is_zero()) else {
            continue;
        };
        m.swap(rank, p);
        let inv = m[rank][c].recip();
        for x in m[rank].iter_mut() {
            *x *= inv;
        }
        for i in 0..m.len() {
            if i != rank && !m[i][c].is_zero() {
                let f = m[i][c];
                for j in 0..n {
                    let t = f * m[rank][j];
                    m[i][j] -= t;
                }
            }
        }
        rank += 1;
        if rank == m.len() {
            break;
        }
    }
    if rank < m.len() {
        return None;
    }
    Some(CanonicalKey(
        m.into_iter()
            .map(|r| r.into_iter().map(|x| (*x.numer(), *x.denom())).collect())
            .collect(),
    ))
}

fn binomial(n: u128, k: u128) -> u128 {
    if k > n {
        return 0;
    }
    let mut r: u128 = 1;
    for i in 0..k {
        r = r.saturating_mul(n - i) / (i + 1);
    }
    r
}

/// Orthonormalizes `rows` (modified Gram–Schmidt, two passes) against the
/// already orthonormal `against`.
fn orthonormalize(rows: &[Vec<f64>], against: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for r in rows {
        let mut v = r.clone();
        for _ in 0..2 {
            for b in against.iter().chain(out.iter()) {
                let d: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
                for (x, y) in v.iter_mut().zip(b) {
                    *x -= d * y;
                }
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        out.push(v.into_iter().map(|x| x / norm).collect());
    }
    out
}

/// Orthonormal basis of the complement of `f` (greedy over unit vectors).
fn complement_basis(n: usize, f: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut chosen: Vec<Vec<f64>> = Vec::new();
    let k = n - f.len();
    while chosen.len() < k {
        let mut best: Option<(f64, Vec<f64>)> = None;
        for i in 0..n {
            let mut v = vec![0.0; n];
            v[i] = 1.0;
            for _ in 0..2 {
                for b in f.iter().chain(chosen.iter()) {
                    let d: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
                    for (x, y) in v.iter_mut().zip(b) {
                        *x -= d * y;
                    }
                }
            }
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if best.as_ref().is_none_or(|(b, _)| norm > *b + 1e-12) {
                best = Some((norm, v));
            }
        }
        let (norm, v) = best.expect("n > 0");
        chosen.push(v.into_iter().map(|x| x / norm).collect());
    }
    chosen
}

fn build_subspace(n: usize, height: u32, perp: Vec<Vec<i64>>, key: CanonicalKey) -> RationalSubspace {
    let rows: Vec<Vec<f64>> = perp
        .iter()
        .map(|r| r.iter().map(|&x| x as f64).collect())
        .collect();
    let f_basis = orthonormalize(&rows, &[]);
    let e_basis = complement_basis(n, &f_basis);
    RationalSubspace {
        n,
        k: n - perp.len(),
        height,
        perp_basis: perp,
        e_basis,
        f_basis,
        key,
    }
}

/// All of `G^L(n,k)`, each subspace once, ordered by `(height, key)`.
pub fn enumerate_gl(n: usize, k: usize, l: u32) -> Result<Vec<RationalSubspace>> {
    enumerate_gl_capped(n, k, l, DEFAULT_CANDIDATE_CAP)
}

pub fn enumerate_gl_capped(n: usize, k: usize, l: u32, cap: u128) -> Result<Vec<RationalSubspace>> {
    if n == 0 || k == 0 || k > n {
        return Err(Error::invalid(format!("need 1 <= k <= n, got n = {n}, k = {k}")));
    }
    if l == 0 {
        return Err(Error::invalid("L must be at least 1"));
    }
    if n > 8 {
        return Err(Error::invalid("n must be at most 8"));
    }
    let c = n - k;
    if c == 0 {
        return Ok(vec![build_subspace(n, 1, Vec::new(), CanonicalKey(Vec::new()))]);
    }
    // primitive vectors already cost (2L+1)^n to list
    let raw = (2 * u128::from(l) + 1).saturating_pow(n as u32);
    if raw > cap {
        return Err(Error::CombinatorialBudgetExceeded { candidates: raw, cap });
    }
    let vecs = primitive_vectors(n, l);
    let candidates = binomial(vecs.len() as u128, c as u128);
    if candidates > cap {
        return Err(Error::CombinatorialBudgetExceeded { candidates, cap });
    }
    let heights: Vec<u32> = vecs
        .iter()
        .map(|v| v.iter().map(|x| x.unsigned_abs() as u32).max().unwrap_or(0))
        .collect();

    // per first index, the best (height, tuple) for every key; merged in order
    let merged = (0..vecs.len())
        .into_par_iter()
        .map(|first| {
            let mut local: BTreeMap<CanonicalKey, (u32, Vec<usize>)> = BTreeMap::new();
            let mut idx = vec![first];
            combos(&vecs, &heights, c, &mut idx, &mut local);
            local
        })
        .reduce(BTreeMap::new, |mut a, b| {
            for (key, cand) in b {
                match a.get_mut(&key) {
                    Some(cur) if cand < *cur => *cur = cand,
                    Some(_) => {}
                    None => {
                        a.insert(key, cand);
                    }
                }
            }
            a
        });

    let mut out: Vec<RationalSubspace> = merged
        .into_iter()
        .map(|(key, (h, idx))| {
            let perp = idx.iter().map(|&i| vecs[i].clone()).collect();
            build_subspace(n, h, perp, key)
        })
        .collect();
    out.sort_by(|a, b| (a.height, &a.key).cmp(&(b.height, &b.key)));
    Ok(out)
}

fn combos(
    vecs: &[Vec<i64>],
    heights: &[u32],
    c: usize,
    idx: &mut Vec<usize>,
    out: &mut BTreeMap<CanonicalKey, (u32, Vec<usize>)>,
) {
    if idx.len() == c {
        let rows: Vec<Vec<i64>> = idx.iter().map(|&i| vecs[i].clone()).collect();
        if let Some(key) = canonical_key(&rows) {
            let h = idx.iter().map(|&i| heights[i]).max().unwrap_or(1);
            let cand = (h, idx.clone());
            match out.get_mut(&key) {
                Some(cur) if cand < *cur => *cur = cand,
                Some(_) => {}
                None => {
                    out.insert(key, cand);
                }
            }
        }
        return;
    }
    let start = idx.last().map_or(0, |&i| i + 1);
    for j in start..vecs.len() {
        idx.push(j);
        combos(vecs, heights, c, idx, out);
        idx.pop();
    }
}

/// Every subspace of every dimension `1..=n` up to height `l_max`.
#[derive(Clone, Debug)]
pub struct SubspaceCatalog {
    pub n: usize,
    pub l_max: u32,
    pub subspaces: Vec<RationalSubspace>,
    e_mats: Vec<DMatrix<f64>>,
}

impl SubspaceCatalog {
    pub fn new(n: usize, l_max: u32) -> Result<Self> {
        let mut subspaces = Vec::new();
        for k in 1..=n {
            subspaces.extend(enumerate_gl(n, k, l_max)?);
        }
        let e_mats = subspaces.iter().map(RationalSubspace::e_matrix).collect();
        Ok(Self {
            n,
            l_max,
            subspaces,
            e_mats,
        })
    }

    /// `(σ_min(EᵀβE), index)` for each subspace.
    fn restricted_sigmas(&self, beta: &DMatrix<f64>) -> Vec<f64> {
        self.e_mats
            .par_iter()
            .map(|e| sigma_min_sym(&(e.transpose() * beta * e)))
            .collect()
    }

    pub fn count_by_height(&self, k: usize) -> BTreeMap<u32, usize> {
        let mut m = BTreeMap::new();
        for s in self.subspaces.iter().filter(|s| s.k == k) {
            *m.entry(s.height).or_insert(0) += 1;
        }
        m
    }
}

/// Smallest singular value of a symmetric matrix (`min |λ_i|`).
pub fn sigma_min_sym(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return f64::INFINITY;
    }
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |a, &x| a.min(x.abs()))
}

pub fn symmetric_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Converts rows to a matrix, checking shape and symmetry.
pub fn symmetric_matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(Error::invalid("expected a non-empty square matrix"));
    }
    let m = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
    let scale = m.iter().fold(1.0_f64, |a, x| a.max(x.abs()));
    let asym = (0..n)
        .flat_map(|i| (0..i).map(move |j| (i, j)))
        .fold(0.0_f64, |a, (i, j)| a.max((m[(i, j)] - m[(j, i)]).abs()));
    if asym > 1e-12 * scale {
        return Err(Error::NonSymmetric(asym));
    }
    Ok(m)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SdmStatus {
    CertifiedPass,
    CertifiedFail,
    /// The grid could neither certify nor refute.
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SdmWitness {
    #[serde(rename = "L")]
    pub l: u32,
    pub k: usize,
    pub perp_basis: Vec<Vec<i64>>,
    pub key: String,
    /// Point of the ball (absent for the quadratic check, where the
    /// restricted Hessian is constant).
    pub point: Option<Vec<f64>>,
    /// `max(‖∂_α h_Λ‖, σ_min) · L^{τ'}` at the witness.
    pub margin: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SdmVerdict {
    pub passed: bool,
    pub status: SdmStatus,
    /// Subspace (and point) realizing the smallest margin.
    pub worst_case: Option<SdmWitness>,
    /// Smallest margin over the samples: the check passes there for every
    /// `γ'` strictly below it.
    pub gamma_margin: f64,
    /// Margin after the Lipschitz correction (grid checks only).
    pub certified_margin: Option<f64>,
    pub gamma_p: f64,
    pub tau_p: f64,
    #[serde(rename = "L_max")]
    pub l_max: u32,
    pub subspaces_checked: usize,
}

fn check_hypotheses(gamma_p: f64, tau_p: f64) -> Result<()> {
    if !(gamma_p > 0.0 && gamma_p <= 1.0) {
        return Err(Error::invalid(format!("gamma' must lie in (0, 1], got {gamma_p}")));
    }
    if !(tau_p >= 2.0) || !tau_p.is_finite() {
        return Err(Error::invalid(format!("tau' must be at least 2, got {tau_p}")));
    }
    Ok(())
}

fn witness(s: &RationalSubspace, point: Option<Vec<f64>>, margin: f64) -> SdmWitness {
    SdmWitness {
        l: s.height,
        k: s.k,
        perp_basis: s.perp_basis.clone(),
        key: s.key.to_string(),
        point,
        margin,
    }
}

/// Condition `‖β_Λ η‖ > γ' L^{−τ'} ‖η‖` for every subspace up to `L_max`.
/// `alpha` plays no role.
pub fn check_sdm_quadratic(
    alpha: &[f64],
    beta: &[Vec<f64>],
    gamma_p: f64,
    tau_p: f64,
    l_max: u32,
) -> Result<SdmVerdict> {
    let b = symmetric_matrix(beta)?;
    if !alpha.is_empty() && alpha.len() != b.nrows() {
        return Err(Error::DimensionMismatch {
            expected: b.nrows(),
            got: alpha.len(),
        });
    }
    check_hypotheses(gamma_p, tau_p)?;
    let cat = SubspaceCatalog::new(b.nrows(), l_max)?;
    Ok(quadratic_verdict(&cat, &b, gamma_p, tau_p))
}

/// Quadratic check against a prebuilt catalog (hypotheses not re-checked).
pub fn quadratic_verdict(cat: &SubspaceCatalog, beta: &DMatrix<f64>, gamma_p: f64, tau_p: f64) -> SdmVerdict {
    let sigmas = cat.restricted_sigmas(beta);
    let mut best: Option<(f64, usize)> = None;
    for (i, (s, sub)) in sigmas.iter().zip(&cat.subspaces).enumerate() {
        let m = s * f64::from(sub.height).powf(tau_p);
        if best.is_none_or(|(b, _)| m < b) {
            best = Some((m, i));
        }
    }
    let (margin, idx) = best.expect("catalog is never empty");
    let passed = margin > gamma_p;
    SdmVerdict {
        passed,
        status: if passed {
            SdmStatus::CertifiedPass
        } else {
            SdmStatus::CertifiedFail
        },
        worst_case: Some(witness(&cat.subspaces[idx], None, margin)),
        gamma_margin: margin,
        certified_margin: None,
        gamma_p,
        tau_p,
        l_max: cat.l_max,
        subspaces_checked: cat.subspaces.len(),
    }
}

/// Ball in action space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Ball {
    /// Default ball: radius 2 around the origin.
    pub fn default_for(n: usize) -> Self {
        Self {
            center: vec![0.0; n],
            radius: 2.0,
        }
    }
}

/// Grid check of the SDM alternative on a ball.
///
/// The samples are the `grid_density^n` points of a uniform grid on the
/// bounding box of `B` plus its center. With `M2`, `M3` bounds for the second
/// and third derivatives on the box and `r` the covering radius of the grid,
/// a sample where `‖Eᵀ∇h‖ − M2 r > κ` or `σ_min(½Eᵀ∇²hE) − ½M3 r > κ`
/// (`κ = γ'L^{−τ'}`) certifies its whole cell. A sample strictly inside `B`
/// violating both alternatives is a certified counterexample. Quadratic `h`
/// reduces to [`check_sdm_quadratic`] on `β` (constant Hessian, so the
/// Hessian alternative alone decides).
pub fn check_sdm_polynomial(
    h: &ActionPolynomial<f64>,
    ball: &Ball,
    gamma_p: f64,
    tau_p: f64,
    l_max: u32,
    grid_density: usize,
) -> Result<SdmVerdict> {
    let n = h.dimension();
    if ball.center.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: ball.center.len(),
        });
    }
    if !(ball.radius > 0.0) {
        return Err(Error::invalid("ball radius must be positive"));
    }
    if h.degree() < 2 {
        return Err(Error::invalid("h must have degree at least 2"));
    }
    if grid_density < 2 {
        return Err(Error::invalid("grid_density must be at least 2"));
    }
    check_hypotheses(gamma_p, tau_p)?;
    let cat = SubspaceCatalog::new(n, l_max)?;

    if h.degree() == 2 {
        let beta = DMatrix::from_fn(n, n, |i, j| 0.5 * h.hessian_f64(&vec![0.0; n])[i][j]);
        return Ok(quadratic_verdict(&cat, &beta, gamma_p, tau_p));
    }

    let total = grid_density
        .checked_pow(n as u32)
        .filter(|t| *t <= 50_000_000)
        .ok_or_else(|| Error::invalid("grid too large"))?;
    let step = 2.0 * ball.radius / (grid_density - 1) as f64;
    let cover = 0.5 * step * (n as f64).sqrt();
    let sup = ball.center.iter().fold(0.0_f64, |a, c| a.max(c.abs())) + ball.radius;
    let m2 = h.second_derivative_majorant(sup);
    let m3 = h.third_derivative_majorant(sup);

    let mut points: Vec<Vec<f64>> = vec![ball.center.clone()];
    for idx in 0..total {
        let mut r = idx;
        let mut p = Vec::with_capacity(n);
        for c in &ball.center {
            p.push(c - ball.radius + step * (r % grid_density) as f64);
            r /= grid_density;
        }
        points.push(p);
    }

    struct Sample {
        margin: f64,
        certified: f64,
        fails: bool,
    }
    // per point, per subspace; scanned in a fixed order afterwards
    let results: Vec<Vec<Sample>> = points
        .par_iter()
        .map(|p| {
            let grad = h.gradient_f64(p);
            let hess = h.hessian_f64(p);
            let g = nalgebra::DVector::from_vec(grad);
            let hm = DMatrix::from_fn(n, n, |i, j| 0.5 * hess[i][j]);
            let inside = p
                .iter()
                .zip(&ball.center)
                .map(|(x, c)| (x - c) * (x - c))
                .sum::<f64>()
                .sqrt()
                < ball.radius;
            cat.e_mats
                .iter()
                .zip(&cat.subspaces)
                .map(|(e, sub)| {
                    let lt = f64::from(sub.height).powf(tau_p);
                    let gn = (e.transpose() * &g).norm();
                    let sg = sigma_min_sym(&(e.transpose() * &hm * e));
                    let kappa = gamma_p / lt;
                    Sample {
                        margin: gn.max(sg) * lt,
                        certified: (gn - m2 * cover).max(sg - 0.5 * m3 * cover) * lt,
                        fails: inside && gn <= kappa && sg <= kappa,
                    }
                })
                .collect()
        })
        .collect();

    let mut worst: Option<(f64, usize, usize)> = None;
    let mut cert = f64::INFINITY;
    let mut fail: Option<(usize, usize)> = None;
    for (pi, row) in results.iter().enumerate() {
        for (si, s) in row.iter().enumerate() {
            if worst.is_none_or(|(m, _, _)| s.margin < m) {
                worst = Some((s.margin, pi, si));
            }
            cert = cert.min(s.certified);
            if s.fails && fail.is_none() {
                fail = Some((pi, si));
            }
        }
    }
    let (gamma_margin, wp, ws) = worst.expect("at least one sample");
    let status = if fail.is_some() {
        SdmStatus::CertifiedFail
    } else if cert > gamma_p {
        SdmStatus::CertifiedPass
    } else {
        SdmStatus::Inconclusive
    };
    let worst_case = match fail {
        Some((pi, si)) => witness(&cat.subspaces[si], Some(points[pi].clone()), results[pi][si].margin),
        None => witness(&cat.subspaces[ws], Some(points[wp].clone()), gamma_margin),
    };
    Ok(SdmVerdict {
        passed: status == SdmStatus::CertifiedPass,
        status,
        worst_case: Some(worst_case),
        gamma_margin,
        certified_margin: Some(cert),
        gamma_p,
        tau_p,
        l_max,
        subspaces_checked: cat.subspaces.len(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BadSet {
    /// Disjoint closed intervals in increasing order.
    pub intervals: Vec<(f64, f64)>,
    pub total_measure: f64,
}

impl BadSet {
    pub fn contains(&self, x: f64) -> bool {
        self.intervals.iter().any(|&(a, b)| a <= x && x <= b)
    }
}

/// Sorts and merges closed intervals.
pub fn merge_intervals(mut iv: Vec<(f64, f64)>) -> BadSet {
    iv.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (a, b) in iv {
        match out.last_mut() {
            Some(last) if a <= last.1 => last.1 = last.1.max(b),
            _ => out.push((a, b)),
        }
    }
    let total_measure = out.iter().fold(0.0, |acc, (a, b)| acc + (b - a));
    BadSet {
        intervals: out,
        total_measure,
    }
}

/// `C_κ = ∪ [λ_i − κ, λ_i + κ]` over the eigenvalues of `β_k`.
pub fn bad_set_quadratic(beta_k: &[Vec<f64>], kappa: f64) -> Result<BadSet> {
    if !(kappa > 0.0) || !kappa.is_finite() {
        return Err(Error::invalid("kappa must be positive"));
    }
    let m = symmetric_matrix(beta_k)?;
    Ok(merge_intervals(
        symmetric_eigenvalues(&m)
            .into_iter()
            .map(|l| (l - kappa, l + kappa))
            .collect(),
    ))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrevalenceConfig {
    /// `ξ` is uniform on `[−xi_half_width, xi_half_width]`; the default
    /// `n + 1` contains every eigenvalue of a restriction of `β₀` (entries in
    /// `[−1, 1]`) widened by `γ' <= 1`.
    pub xi_half_width: Option<f64>,
}

impl Default for PrevalenceConfig {
    fn default() -> Self {
        Self { xi_half_width: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrevalenceReport {
    pub n: usize,
    pub tau_p: f64,
    pub gamma_p: f64,
    #[serde(rename = "L_max")]
    pub l_max: u32,
    pub samples: usize,
    pub seed: u64,
    pub rng: String,
    pub beta0: Vec<Vec<f64>>,
    pub probe_interval: (f64, f64),
    /// Fraction of `ξ` draws with `β₀ − ξI` failing the quadratic check.
    pub bad_fraction: f64,
    pub bad_count: usize,
    /// `sqrt(p(1−p)/samples)` at `p = paper_bound` (clipped to `[0, 1]`).
    pub sigma: f64,
    /// 95% Wilson interval for the probe fraction.
    pub ci_low: f64,
    pub ci_high: f64,
    /// `n(n+1) Σ_{L<=L_max} L^{n²−τ'} γ' / probe length`.
    pub paper_bound: f64,
    /// Same with the full series over `L`; infinite unless `τ' > n² + 1`.
    pub paper_series_bound: f64,
    /// `Σ_Λ 2k γ' h(Λ)^{−τ'} / probe length` with the true counts.
    pub union_bound: f64,
    /// Exact measure of the probe's bad set divided by the probe length.
    pub exact_fraction: f64,
    /// Fraction failing for independent fully random `β` (entries uniform
    /// on `[−1, 1]`).
    pub random_bad_fraction: f64,
    pub subspace_counts: BTreeMap<usize, BTreeMap<u32, usize>>,
}

/// `Σ_{L>=1} L^{−s}` (infinite for `s <= 1`).
pub fn zeta(s: f64) -> f64 {
    if s <= 1.0 {
        return f64::INFINITY;
    }
    let n = 1000usize;
    let mut sum = 0.0;
    for l in (1..=n).rev() {
        sum += (l as f64).powf(-s);
    }
    let nf = n as f64;
    sum + nf.powf(1.0 - s) / (s - 1.0) - 0.5 * nf.powf(-s) + s / 12.0 * nf.powf(-s - 1.0)
}

fn random_symmetric(rng: &mut CounterRng, n: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let x = rng.uniform(-1.0, 1.0);
            m[(i, j)] = x;
            m[(j, i)] = x;
        }
    }
    m
}

fn wilson(k: usize, n: usize) -> (f64, f64) {
    let z = 1.96;
    let nf = n as f64;
    let p = k as f64 / nf;
    let den = 1.0 + z * z / nf;
    let centre = (p + z * z / (2.0 * nf)) / den;
    let half = z * (p * (1.0 - p) / nf + z * z / (4.0 * nf * nf)).sqrt() / den;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Monte-Carlo estimate of the bad set along the probe `β₀ − ξI`.
///
/// Streams: 0 draws `β₀`, 1 the `ξ` values, 2 the fully random matrices.
pub fn prevalence_estimate(
    n: usize,
    tau_p: f64,
    gamma_p: f64,
    l_max: u32,
    samples: usize,
    seed: u64,
    cfg: &PrevalenceConfig,
) -> Result<PrevalenceReport> {
    if samples < 100 {
        return Err(Error::invalid("samples must be at least 100"));
    }
    if !(gamma_p >= 0.0 && gamma_p <= 1.0) {
        return Err(Error::invalid("gamma' must lie in [0, 1]"));
    }
    if !(tau_p >= 2.0) {
        return Err(Error::invalid("tau' must be at least 2"));
    }
    let cat = SubspaceCatalog::new(n, l_max)?;
    let half = cfg.xi_half_width.unwrap_or(n as f64 + 1.0);
    if !(half > 0.0) {
        return Err(Error::invalid("xi_half_width must be positive"));
    }
    let len = 2.0 * half;
    let beta0 = random_symmetric(&mut CounterRng::new(seed, 0), n);
    let fails = |b: &DMatrix<f64>| -> bool {
        // strict condition σ·L^τ' > γ'; at γ' = 0 only exact singularity fails
        cat.restricted_sigmas(b)
            .iter()
            .zip(&cat.subspaces)
            .any(|(s, sub)| s * f64::from(sub.height).powf(tau_p) <= gamma_p)
    };

    let mut xi_rng = CounterRng::new(seed, 1);
    let xis: Vec<f64> = (0..samples).map(|_| xi_rng.uniform(-half, half)).collect();
    let eye = DMatrix::<f64>::identity(n, n);
    let bad_count = xis
        .par_iter()
        .map(|&xi| fails(&(&beta0 - &eye * xi)) as usize)
        .sum::<usize>();

    let mut r_rng = CounterRng::new(seed, 2);
    let randoms: Vec<DMatrix<f64>> = (0..samples).map(|_| random_symmetric(&mut r_rng, n)).collect();
    let random_bad = randoms.par_iter().map(|b| fails(b) as usize).sum::<usize>();

    let nn = (n * n) as f64;
    let truncated: f64 = (1..=l_max).map(|l| f64::from(l).powf(nn - tau_p)).sum();
    let paper_bound = (n * (n + 1)) as f64 * truncated * gamma_p / len;
    let paper_series_bound = (n * (n + 1)) as f64 * zeta(tau_p - nn) * gamma_p / len;
    let union_bound = cat
        .subspaces
        .iter()
        .map(|s| 2.0 * s.k as f64 * gamma_p * f64::from(s.height).powf(-tau_p))
        .sum::<f64>()
        / len;

    // exact probe bad set: eigenvalue intervals of each restriction
    let mut iv = Vec::new();
    if gamma_p > 0.0 {
        for (sub, e) in cat.subspaces.iter().zip(&cat.e_mats) {
            let kappa = gamma_p * f64::from(sub.height).powf(-tau_p);
            for l in symmetric_eigenvalues(&(e.transpose() * &beta0 * e)) {
                iv.push(((l - kappa).max(-half), (l + kappa).min(half)));
            }
        }
    }
    let exact = merge_intervals(iv.into_iter().filter(|(a, b)| a < b).collect());

    let p = paper_bound.clamp(0.0, 1.0);
    let (ci_low, ci_high) = wilson(bad_count, samples);
    let mut subspace_counts = BTreeMap::new();
    for k in 1..=n {
        subspace_counts.insert(k, cat.count_by_height(k));
    }
    Ok(PrevalenceReport {
        n,
        tau_p,
        gamma_p,
        l_max,
        samples,
        seed,
        rng: crate::lab::rng::ALGORITHM.to_string(),
        beta0: (0..n).map(|i| (0..n).map(|j| beta0[(i, j)]).collect()).collect(),
        probe_interval: (-half, half),
        bad_fraction: bad_count as f64 / samples as f64,
        bad_count,
        sigma: (p * (1.0 - p) / samples as f64).sqrt(),
        ci_low,
        ci_high,
        paper_bound,
        paper_series_bound,
        union_bound,
        exact_fraction: exact.total_measure / len,
        random_bad_fraction: random_bad as f64 / samples as f64,
        subspace_counts,
    })
}
