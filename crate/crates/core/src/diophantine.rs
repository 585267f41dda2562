//! Small-divisor checks for frequency vectors: non-resonance up to a finite
//! order and empirical Diophantine constants `|k·α| >= γ |k|₁^{−τ}`.
//!
//! Integer vectors are visited shell by shell (`|k|₁ = 1, 2, ...`), in
//! lexicographic order inside a shell, keeping one of `{k, −k}`: the one
//! whose last nonzero entry is positive.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{int_dot, Rational};
use num_traits::{Signed, Zero};

/// Tolerance below which `k·α` counts as zero.
pub fn zero_tolerance(k_l1: u64, max_abs_alpha: f64) -> f64 {
    1e-12 * k_l1 as f64 * max_abs_alpha
}

fn max_abs(alpha: &[f64]) -> f64 {
    alpha.iter().fold(0.0_f64, |m, a| m.max(a.abs()))
}

/// Calls `f` on every canonical `k` with `|k|₁ = s`, in lexicographic order.
pub fn for_each_in_shell(n: usize, s: u64, mut f: impl FnMut(&[i64])) {
    fn rec(pos: usize, rem: i64, k: &mut [i64], f: &mut impl FnMut(&[i64])) {
        let n = k.len();
        if pos == n - 1 {
            let choices: &[i64] = if rem == 0 { &[0] } else { &[-rem, rem] };
            for &v in choices {
                k[pos] = v;
                if is_canonical(k) {
                    f(k);
                }
            }
            return;
        }
        for v in -rem..=rem {
            k[pos] = v;
            rec(pos + 1, rem - v.abs(), k, f);
        }
    }
    if n == 0 || s == 0 {
        return;
    }
    let mut k = vec![0i64; n];
    rec(0, s as i64, &mut k, &mut f);
}

fn is_canonical(k: &[i64]) -> bool {
    k.iter().rev().find(|&&x| x != 0).is_some_and(|&x| x > 0)
}

pub fn l1(k: &[i64]) -> u64 {
    k.iter().map(|x| x.unsigned_abs()).sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResonanceReport {
    pub order: u32,
    pub resonant: bool,
    pub witness: Option<Vec<i64>>,
    /// Smallest `|k·α|` over `0 < |k|₁ <= order`.
    pub min_abs: f64,
    /// A vector attaining `min_abs` (first in enumeration order).
    pub argmin: Vec<i64>,
}

/// Per-shell summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShellMin {
    pub norm: u64,
    pub min_abs: f64,
    pub k: Vec<i64>,
    /// First `k` of the shell below the zero tolerance.
    pub resonant: Option<Vec<i64>>,
}

fn shell_min(alpha: &[f64], s: u64, amax: f64) -> ShellMin {
    let tol = zero_tolerance(s, amax);
    let mut best = f64::INFINITY;
    let mut best_k = Vec::new();
    let mut resonant = None;
    for_each_in_shell(alpha.len(), s, |k| {
        let v = int_dot(k, alpha).abs();
        if v < best {
            best = v;
            best_k = k.to_vec();
        }
        if resonant.is_none() && v < tol {
            resonant = Some(k.to_vec());
        }
    });
    ShellMin {
        norm: s,
        min_abs: best,
        k: best_k,
        resonant,
    }
}

/// Minimum of `|k·α|` on every shell `1..=k_max`. Shells are computed in
/// parallel and returned in order.
pub fn shell_minima(alpha: &[f64], k_max: u64) -> Vec<ShellMin> {
    let amax = max_abs(alpha);
    (1..=k_max)
        .into_par_iter()
        .map(|s| shell_min(alpha, s, amax))
        .collect()
}

fn zero_alpha_report(n: usize, order: u32) -> ResonanceReport {
    let mut e1 = vec![0; n];
    e1[0] = 1;
    ResonanceReport {
        order,
        resonant: true,
        witness: Some(e1.clone()),
        min_abs: 0.0,
        argmin: e1,
    }
}

/// Whether `k·α ≠ 0` for all `0 < |k|₁ <= order`.
pub fn check_nonresonant(alpha: &[f64], order: u32) -> Result<ResonanceReport> {
    validate_alpha(alpha)?;
    if order == 0 {
        return Err(Error::invalid("order must be at least 1"));
    }
    if max_abs(alpha) == 0.0 {
        return Ok(zero_alpha_report(alpha.len(), order));
    }
    let shells = shell_minima(alpha, order as u64);
    let mut min_abs = f64::INFINITY;
    let mut argmin = Vec::new();
    let mut witness = None;
    for sh in shells {
        if sh.min_abs < min_abs {
            min_abs = sh.min_abs;
            argmin = sh.k;
        }
        if witness.is_none() {
            witness = sh.resonant;
        }
    }
    Ok(ResonanceReport {
        order,
        resonant: witness.is_some(),
        witness,
        min_abs,
        argmin,
    })
}

/// Exact version for rational frequencies: resonance means `k·α = 0`.
pub fn check_nonresonant_exact(alpha: &[Rational], order: u32) -> Result<ResonanceReport> {
    if alpha.is_empty() {
        return Err(Error::invalid("alpha must be non-empty"));
    }
    if order == 0 {
        return Err(Error::invalid("order must be at least 1"));
    }
    if alpha.iter().all(Zero::is_zero) {
        return Ok(zero_alpha_report(alpha.len(), order));
    }
    let mut min_abs: Option<Rational> = None;
    let mut argmin = Vec::new();
    let mut witness = None;
    for s in 1..=order as u64 {
        for_each_in_shell(alpha.len(), s, |k| {
            let mut dot = Rational::zero();
            for (&ki, a) in k.iter().zip(alpha) {
                if ki != 0 {
                    dot += a * Rational::from_integer(ki.into());
                }
            }
            let v = dot.abs();
            if witness.is_none() && v.is_zero() {
                witness = Some(k.to_vec());
            }
            if min_abs.as_ref().is_none_or(|m| v < *m) {
                min_abs = Some(v);
                argmin = k.to_vec();
            }
        });
    }
    let min_abs = min_abs.map_or(f64::INFINITY, |m| crate::scalar::RealCoeff::as_f64(&m));
    Ok(ResonanceReport {
        order,
        resonant: witness.is_some(),
        witness,
        min_abs,
        argmin,
    })
}

fn validate_alpha(alpha: &[f64]) -> Result<()> {
    if alpha.is_empty() {
        return Err(Error::invalid("alpha must be non-empty"));
    }
    if alpha.iter().any(|a| !a.is_finite()) {
        return Err(Error::invalid("alpha must be finite"));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiophantineEstimate {
    pub gamma_hat: f64,
    pub tau: f64,
    #[serde(rename = "K")]
    pub k_max: u64,
    pub argmin_k: Vec<i64>,
}

fn resonant_error(alpha: &[f64], k: Vec<i64>) -> Error {
    let value = int_dot(&k, alpha).abs();
    Error::ResonantFrequency { k, value }
}

/// `γ̂ = min_{0<|k|₁<=K} |k·α| |k|₁^τ`.
pub fn estimate_gamma(alpha: &[f64], tau: f64, k_max: u64) -> Result<DiophantineEstimate> {
    validate_alpha(alpha)?;
    if k_max == 0 {
        return Err(Error::invalid("K must be at least 1"));
    }
    if !(tau >= 0.0) {
        return Err(Error::invalid(format!("tau must be non-negative, got {tau}")));
    }
    let shells = gamma_shells(alpha, k_max)?;
    Ok(gamma_from_shells(&shells, tau, k_max))
}

fn gamma_shells(alpha: &[f64], k_max: u64) -> Result<Vec<ShellMin>> {
    if max_abs(alpha) == 0.0 {
        let mut e1 = vec![0; alpha.len()];
        e1[0] = 1;
        return Err(Error::ResonantFrequency { k: e1, value: 0.0 });
    }
    let shells = shell_minima(alpha, k_max);
    if let Some(k) = shells.iter().find_map(|s| s.resonant.clone()) {
        return Err(resonant_error(alpha, k));
    }
    Ok(shells)
}

fn gamma_from_shells(shells: &[ShellMin], tau: f64, k_max: u64) -> DiophantineEstimate {
    // |k|₁^τ is constant on a shell, so the shell minimum decides
    let mut gamma_hat = f64::INFINITY;
    let mut argmin = Vec::new();
    for sh in shells {
        let g = sh.min_abs * (sh.norm as f64).powf(tau);
        if g < gamma_hat {
            gamma_hat = g;
            argmin = sh.k.clone();
        }
    }
    DiophantineEstimate {
        gamma_hat,
        tau,
        k_max,
        argmin_k: argmin,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TauFit {
    pub tau_fit: f64,
    /// Root-mean-square residual of the fit in log space.
    pub residual: f64,
    /// Record-setting shells `(|k|₁, |k·α|)`.
    pub records: Vec<(u64, f64)>,
}

/// Slope of `log(1/|k·α|)` against `log|k|₁` over the shells that set a new
/// running minimum.
pub fn fit_tau(alpha: &[f64], k_max: u64) -> Result<TauFit> {
    validate_alpha(alpha)?;
    if k_max < 10 {
        return Err(Error::invalid("fit_tau needs K >= 10"));
    }
    let shells = gamma_shells(alpha, k_max)?;
    Ok(fit_records(&record_envelope(&shells)))
}

/// Shells where the running minimum of `|k·α|` strictly decreases.
pub fn record_envelope(shells: &[ShellMin]) -> Vec<(u64, f64)> {
    let mut best = f64::INFINITY;
    let mut out = Vec::new();
    for sh in shells {
        if sh.min_abs < best {
            best = sh.min_abs;
            out.push((sh.norm, sh.min_abs));
        }
    }
    out
}

fn fit_records(records: &[(u64, f64)]) -> TauFit {
    let pts: Vec<(f64, f64)> = records
        .iter()
        .map(|&(s, v)| ((s as f64).ln(), -v.ln()))
        .collect();
    if pts.len() < 2 {
        return TauFit {
            tau_fit: 0.0,
            residual: 0.0,
            records: records.to_vec(),
        };
    }
    let (slope, intercept) = least_squares(&pts);
    let rss: f64 = pts
        .iter()
        .map(|(x, y)| (y - slope * x - intercept).powi(2))
        .sum();
    TauFit {
        tau_fit: slope,
        residual: (rss / pts.len() as f64).sqrt(),
        records: records.to_vec(),
    }
}

/// Ordinary least squares `y = a x + b`, returning `(a, b)`.
pub fn least_squares(pts: &[(f64, f64)]) -> (f64, f64) {
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return (0.0, my);
    }
    let a = sxy / sxx;
    (a, my - a * mx)
}
