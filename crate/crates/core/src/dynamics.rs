//! Long-time integration of polynomial Hamiltonian flows and formal-action
//! drift measurement.
//!
//! Ensembles work in scaled variables: the Hamiltonian `H` is replaced by
//! `ρ^{-2} H(ρ z)` and initial points are drawn from `{|Ĩ(0)|₁ < 1}`, so
//! drifts and escape thresholds are directly comparable across `ρ`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::birkhoff::NormalFormResult;
use crate::error::{Error, Result};
use crate::lab::rng::CounterRng;
use crate::model::{euclidean_norm, formal_actions, EllipticHamiltonian};
use crate::poly::Evaluator;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ImplicitMidpoint,
    Gauss4,
    /// Classical explicit Runge–Kutta. Not symplectic; kept as a reference
    /// for secular energy drift.
    Rk4,
}

impl Method {
    pub fn order(self) -> u32 {
        match self {
            Method::ImplicitMidpoint => 2,
            Method::Gauss4 | Method::Rk4 => 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntegratorConfig {
    pub method: Method,
    pub dt: f64,
    pub fixed_point_tol: f64,
    pub max_fixed_point_iters: usize,
    pub energy_abort_threshold: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            method: Method::ImplicitMidpoint,
            dt: 1e-2,
            fixed_point_tol: 1e-13,
            max_fixed_point_iters: 50,
            energy_abort_threshold: 1e-3,
        }
    }
}

impl IntegratorConfig {
    pub fn with_method(method: Method, dt: f64) -> Self {
        Self {
            method,
            dt,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        // negative dt is allowed for backward runs
        if !(self.dt.is_finite() && self.dt != 0.0) {
            return Err(Error::invalid(format!("dt must be finite and nonzero, got {}", self.dt)));
        }
        if !(self.fixed_point_tol > 0.0) || !(self.energy_abort_threshold > 0.0) {
            return Err(Error::invalid("tolerances must be positive"));
        }
        if self.max_fixed_point_iters == 0 {
            return Err(Error::invalid("max_fixed_point_iters must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AbortReason {
    EnergyDrift,
    LeftDomain,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriftRecord {
    pub sample_times: Vec<f64>,
    pub actions: Vec<Vec<f64>>,
    pub energies: Vec<f64>,
    /// Maximum over every step, not only the stored samples.
    pub max_drift_l1: f64,
    /// `None` means censored at `t_end`.
    pub escape_time: Option<f64>,
    pub escape_threshold: Option<f64>,
    pub t_end: f64,
    pub steps: u64,
    pub aborted: Option<AbortReason>,
    /// `max − min` of the sampled energies.
    pub energy_spread: f64,
    pub final_state: Vec<f64>,
}

impl DriftRecord {
    pub fn drift_at_samples(&self) -> Vec<f64> {
        let a0 = &self.actions[0];
        self.actions.iter().map(|a| l1_diff(a, a0)).collect()
    }
}

fn l1_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// One-step map for a fixed vector field, reusing its work buffers.
pub struct Stepper {
    ev: Evaluator,
    cfg: IntegratorConfig,
    dim: usize,
    buf: Vec<Vec<f64>>,
}

const GAUSS_A: [[f64; 2]; 2] = [
    [0.25, 0.25 - 0.288_675_134_594_812_9],
    [0.25 + 0.288_675_134_594_812_9, 0.25],
];

impl Stepper {
    pub fn new(ev: Evaluator, cfg: IntegratorConfig) -> Result<Self> {
        cfg.validate()?;
        let dim = 2 * ev.dimension();
        Ok(Self {
            ev,
            cfg,
            dim,
            buf: vec![vec![0.0; dim]; 8],
        })
    }

    pub fn config(&self) -> &IntegratorConfig {
        &self.cfg
    }

    /// Advances `z` in place by one step of size `dt`. On failure `z` is
    /// left unchanged and the iteration count is returned.
    pub fn step(&mut self, z: &mut [f64], dt: f64) -> std::result::Result<(), usize> {
        match self.cfg.method {
            Method::ImplicitMidpoint => self.midpoint(z, dt),
            Method::Gauss4 => self.gauss4(z, dt),
            Method::Rk4 => {
                self.rk4(z, dt);
                Ok(())
            }
        }
    }

    // y = z + dt/2 f(y), z' = 2y − z
    fn midpoint(&mut self, z: &mut [f64], dt: f64) -> std::result::Result<(), usize> {
        let d = self.dim;
        let (y, rest) = self.buf.split_at_mut(1);
        let y = &mut y[0];
        let f = &mut rest[0];
        self.ev.vector_field(z, f);
        for i in 0..d {
            y[i] = z[i] + 0.5 * dt * f[i];
        }
        let tol = self.cfg.fixed_point_tol;
        let mut converged = false;
        for it in 0..self.cfg.max_fixed_point_iters {
            self.ev.vector_field(y, f);
            let mut delta = 0.0f64;
            for i in 0..d {
                let next = z[i] + 0.5 * dt * f[i];
                delta = delta.max((next - y[i]).abs());
                y[i] = next;
            }
            if !delta.is_finite() {
                return Err(it + 1);
            }
            if converged {
                break;
            }
            // one extra sweep after reaching tolerance pushes the residual
            // to the rounding floor
            converged = delta <= tol;
        }
        if !converged {
            return Err(self.cfg.max_fixed_point_iters);
        }
        for i in 0..d {
            z[i] = 2.0 * y[i] - z[i];
        }
        Ok(())
    }

    fn gauss4(&mut self, z: &mut [f64], dt: f64) -> std::result::Result<(), usize> {
        let d = self.dim;
        let [k1, k2, y1, y2, prev, ..] = &mut self.buf[..] else {
            unreachable!()
        };
        self.ev.vector_field(z, k1);
        k2.copy_from_slice(k1);
        let tol = self.cfg.fixed_point_tol;
        let mut converged = false;
        for it in 0..self.cfg.max_fixed_point_iters {
            for i in 0..d {
                y1[i] = z[i] + dt * (GAUSS_A[0][0] * k1[i] + GAUSS_A[0][1] * k2[i]);
                y2[i] = z[i] + dt * (GAUSS_A[1][0] * k1[i] + GAUSS_A[1][1] * k2[i]);
            }
            // change of dt·k, which is what enters the update
            let mut delta = 0.0f64;
            for (k, y) in [(&mut *k1, &*y1), (&mut *k2, &*y2)] {
                prev.copy_from_slice(k);
                self.ev.vector_field(y, k);
                for i in 0..d {
                    delta = delta.max(dt.abs() * (k[i] - prev[i]).abs());
                }
            }
            if !delta.is_finite() {
                return Err(it + 1);
            }
            if converged {
                break;
            }
            converged = delta <= tol;
        }
        if !converged {
            return Err(self.cfg.max_fixed_point_iters);
        }
        for i in 0..d {
            z[i] += 0.5 * dt * (k1[i] + k2[i]);
        }
        Ok(())
    }

    fn rk4(&mut self, z: &mut [f64], dt: f64) {
        let d = self.dim;
        let [k1, k2, k3, k4, y, ..] = &mut self.buf[..] else {
            unreachable!()
        };
        self.ev.vector_field(z, k1);
        for i in 0..d {
            y[i] = z[i] + 0.5 * dt * k1[i];
        }
        self.ev.vector_field(y, k2);
        for i in 0..d {
            y[i] = z[i] + 0.5 * dt * k2[i];
        }
        self.ev.vector_field(y, k3);
        for i in 0..d {
            y[i] = z[i] + dt * k3[i];
        }
        self.ev.vector_field(y, k4);
        for i in 0..d {
            z[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
}

/// Startup check for the implicit methods: the fixed-point map contracts
/// when `|dt| · sup‖∇²H‖ < 1` on the domain.
pub fn check_step_size(h: &EllipticHamiltonian, cfg: &IntegratorConfig) -> Result<()> {
    if cfg.method == Method::Rk4 {
        return Ok(());
    }
    let lip = h.polynomial().hessian_majorant(h.s());
    let factor = match cfg.method {
        Method::ImplicitMidpoint => 0.5,
        _ => 0.75,
    };
    if cfg.dt.abs() * factor * lip >= 1.0 {
        return Err(Error::ThresholdViolation(format!(
            "dt = {} too large: dt·{factor}·Hessian majorant = {:.3e} must be < 1",
            cfg.dt,
            cfg.dt.abs() * factor * lip
        )));
    }
    Ok(())
}

/// Integrates `H` from `z0` up to time `t_max` (a whole number of steps,
/// rounded up), sampling every `sample_stride` steps and at the end.
pub fn integrate(
    h: &EllipticHamiltonian,
    z0: &[f64],
    cfg: &IntegratorConfig,
    t_max: f64,
    sample_stride: u64,
    escape_threshold: Option<f64>,
) -> Result<DriftRecord> {
    cfg.validate()?;
    let n = h.dimension();
    if z0.len() != 2 * n {
        return Err(Error::DimensionMismatch {
            expected: 2 * n,
            got: z0.len(),
        });
    }
    if !(t_max >= 0.0 && t_max.is_finite()) {
        return Err(Error::invalid(format!("T must be finite and non-negative, got {t_max}")));
    }
    if sample_stride == 0 {
        return Err(Error::invalid("sample_stride must be at least 1"));
    }
    let norm0 = euclidean_norm(z0);
    if norm0 >= h.s() {
        return Err(Error::OutOfDomain {
            norm: norm0,
            radius: h.s(),
        });
    }
    check_step_size(h, cfg)?;

    let ev = h.evaluator();
    let e0 = ev.value(z0);
    let a0 = formal_actions(n, z0)?;
    let mut stepper = Stepper::new(ev, cfg.clone())?;
    let dt = cfg.dt.abs();
    let steps = (t_max / dt).ceil() as u64;

    let mut rec = DriftRecord {
        sample_times: vec![0.0],
        actions: vec![a0.clone()],
        energies: vec![e0],
        max_drift_l1: 0.0,
        escape_time: None,
        escape_threshold,
        t_end: 0.0,
        steps: 0,
        aborted: None,
        energy_spread: 0.0,
        final_state: z0.to_vec(),
    };
    let mut z = z0.to_vec();
    let mut a = vec![0.0; n];
    for step in 1..=steps {
        let t = step as f64 * dt;
        if let Err(iterations) = stepper.step(&mut z, cfg.dt) {
            return Err(Error::FixedPointDivergence {
                t: t - dt,
                iterations,
            });
        }
        for i in 0..n {
            a[i] = 0.5 * (z[i] * z[i] + z[n + i] * z[n + i]);
        }
        let drift = l1_diff(&a, &a0);
        if drift > rec.max_drift_l1 {
            rec.max_drift_l1 = drift;
        }
        if rec.escape_time.is_none() && escape_threshold.is_some_and(|c| drift > c) {
            rec.escape_time = Some(t);
        }
        rec.steps = step;
        rec.t_end = t;
        let out = euclidean_norm(&z) >= h.s();
        let energy = if out { f64::NAN } else { stepper.ev.value(&z) };
        let abort = if out {
            Some(AbortReason::LeftDomain)
        } else if !((energy - e0).abs() <= cfg.energy_abort_threshold) {
            Some(AbortReason::EnergyDrift)
        } else {
            None
        };
        if abort.is_some() || step % sample_stride == 0 || step == steps {
            rec.sample_times.push(t);
            rec.actions.push(a.clone());
            rec.energies.push(energy);
        }
        if abort.is_some() {
            rec.aborted = abort;
            break;
        }
    }
    let (lo, hi) = rec
        .energies
        .iter()
        .filter(|e| e.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &e| (lo.min(e), hi.max(e)));
    rec.energy_spread = hi - lo;
    rec.final_state = z;
    Ok(rec)
}

/// Point with actions `actions` and angles `angles`:
/// `q_i = √(2Ĩ_i) cos θ_i`, `p_i = √(2Ĩ_i) sin θ_i`.
pub fn point_from_action_angle(actions: &[f64], angles: &[f64]) -> Vec<f64> {
    let n = actions.len();
    let mut z = vec![0.0; 2 * n];
    for i in 0..n {
        let r = (2.0 * actions[i]).sqrt();
        z[i] = r * angles[i].cos();
        z[n + i] = r * angles[i].sin();
    }
    z
}

/// Initial point `index` of an ensemble: actions uniform on the open simplex
/// `{Ĩ ≥ 0, |Ĩ|₁ < 1}`, angles uniform, drawn from stream `index` of `seed`.
pub fn ensemble_point(n: usize, seed: u64, index: u64) -> Vec<f64> {
    let mut rng = CounterRng::new(seed, index);
    let actions = rng.simplex_interior(n);
    let angles: Vec<f64> = (0..n).map(|_| rng.uniform(0.0, std::f64::consts::TAU)).collect();
    point_from_action_angle(&actions, &angles)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scaling {
    /// `ρ^{-2} H(ρ z)`, frequencies unchanged.
    A,
    /// `ρ^{-4} H(ρ z)`, frequencies multiplied by `ρ^{-2}`.
    B,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnsembleOptions {
    pub scaling: Scaling,
    pub sample_stride: u64,
    /// Escape threshold is `escape_factor · ρ` in scaled actions.
    pub escape_factor: f64,
}

impl Default for EnsembleOptions {
    fn default() -> Self {
        Self {
            scaling: Scaling::A,
            sample_stride: 1000,
            escape_factor: 2.0,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrajectoryOutcome {
    pub index: u64,
    pub z0: Vec<f64>,
    pub record: Option<DriftRecord>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub rho: f64,
    pub n_trajectories: usize,
    pub t_max: f64,
    pub seed: u64,
    pub escape_threshold: f64,
    pub max_drift: f64,
    pub median_drift: f64,
    pub escape_count: usize,
    /// Earliest escape over the ensemble, `None` if all are censored.
    pub first_escape_time: Option<f64>,
    pub aborted_count: usize,
    pub error_count: usize,
    pub trajectories: Vec<TrajectoryOutcome>,
}

/// Scaled Hamiltonian used by the ensembles.
pub fn scaled_hamiltonian(h: &EllipticHamiltonian, rho: f64, scaling: Scaling) -> Result<EllipticHamiltonian> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::invalid(format!("rho must be positive, got {rho}")));
    }
    match scaling {
        Scaling::A => h.scaled(&rho, -2),
        Scaling::B => h.scaled(&rho, -4),
    }
}

/// Integrates `n_traj` trajectories of the `ρ`-scaled Hamiltonian from
/// `{|Ĩ(0)|₁ < 1}`. Integrator errors are recorded per trajectory.
pub fn ensemble_drift(
    h: &EllipticHamiltonian,
    rho: f64,
    n_traj: usize,
    t_max: f64,
    cfg: &IntegratorConfig,
    seed: u64,
    opts: &EnsembleOptions,
) -> Result<EnsembleSummary> {
    if n_traj == 0 {
        return Err(Error::invalid("ensemble needs N >= 1"));
    }
    cfg.validate()?;
    let hs = scaled_hamiltonian(h, rho, opts.scaling)?;
    let n = hs.dimension();
    let threshold = opts.escape_factor * rho;
    let trajectories: Vec<TrajectoryOutcome> = (0..n_traj as u64)
        .into_par_iter()
        .map(|index| {
            let z0 = ensemble_point(n, seed, index);
            match integrate(&hs, &z0, cfg, t_max, opts.sample_stride, Some(threshold)) {
                Ok(rec) => TrajectoryOutcome {
                    index,
                    z0,
                    record: Some(rec),
                    error: None,
                },
                Err(e) => TrajectoryOutcome {
                    index,
                    z0,
                    record: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();

    let mut drifts: Vec<f64> = trajectories
        .iter()
        .filter_map(|t| t.record.as_ref().map(|r| r.max_drift_l1))
        .collect();
    drifts.sort_by(f64::total_cmp);
    let median_drift = median(&drifts);
    let records = trajectories.iter().filter_map(|t| t.record.as_ref());
    let escapes: Vec<f64> = records.clone().filter_map(|r| r.escape_time).collect();
    Ok(EnsembleSummary {
        rho,
        n_trajectories: n_traj,
        t_max,
        seed,
        escape_threshold: threshold,
        max_drift: drifts.last().copied().unwrap_or(f64::NAN),
        median_drift,
        escape_count: escapes.len(),
        first_escape_time: escapes.iter().copied().reduce(f64::min),
        aborted_count: records.filter(|r| r.aborted.is_some()).count(),
        error_count: trajectories.iter().filter(|t| t.error.is_some()).count(),
        trajectories,
    })
}

fn median(sorted: &[f64]) -> f64 {
    let len = sorted.len();
    if len == 0 {
        f64::NAN
    } else if len % 2 == 1 {
        sorted[len / 2]
    } else {
        0.5 * (sorted[len / 2 - 1] + sorted[len / 2])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EscapeRow {
    pub rho: f64,
    /// Earliest escape over the ensemble; `None` means censored at `t_max`.
    pub escape_time: Option<f64>,
    pub censored: bool,
    pub max_drift: f64,
    pub escape_count: usize,
    /// `d log T_esc / d log(1/ρ)` against the previous row, when both
    /// escaped.
    pub local_slope: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EscapeScan {
    pub t_max: f64,
    pub threshold_factor: f64,
    pub n_trajectories: usize,
    pub seed: u64,
    pub rows: Vec<EscapeRow>,
}

pub fn escape_time_scan(
    h: &EllipticHamiltonian,
    rho_list: &[f64],
    threshold_factor: f64,
    t_max: f64,
    cfg: &IntegratorConfig,
    n_traj: usize,
    seed: u64,
    opts: &EnsembleOptions,
) -> Result<EscapeScan> {
    if rho_list.is_empty() || rho_list.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::invalid("rho_list must be non-empty and strictly decreasing"));
    }
    if !(threshold_factor > 0.0) {
        return Err(Error::invalid("drift threshold factor must be positive"));
    }
    let opts = EnsembleOptions {
        escape_factor: threshold_factor,
        ..opts.clone()
    };
    let mut rows: Vec<EscapeRow> = Vec::with_capacity(rho_list.len());
    for &rho in rho_list {
        let s = ensemble_drift(h, rho, n_traj, t_max, cfg, seed, &opts)?;
        let local_slope = match (rows.last(), s.first_escape_time) {
            (Some(prev), Some(t)) => prev
                .escape_time
                .map(|tp| (t / tp).ln() / (prev.rho / rho).ln()),
            _ => None,
        };
        rows.push(EscapeRow {
            rho,
            escape_time: s.first_escape_time,
            censored: s.first_escape_time.is_none(),
            max_drift: s.max_drift,
            escape_count: s.escape_count,
            local_slope,
        });
    }
    Ok(EscapeScan {
        t_max,
        threshold_factor,
        n_trajectories: n_traj,
        seed,
        rows,
    })
}

/// Drift bound through the normal-form transform `Φ_m`: over the horizon
/// `min(T, 0.1 / remainder majorant)` the actions of `Φ_m^{-1} z` move by at
/// most the remainder vector field times time, and `Φ_m` moves points by at
/// most the transform displacement. The factor 10 absorbs the conversion
/// from phase-space to action distances on the ball.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriftBound {
    pub m: u32,
    pub radius: f64,
    pub horizon: f64,
    pub remainder_majorant: f64,
    pub remainder_field_majorant: f64,
    pub displacement: f64,
    pub bound: f64,
}

pub fn triangle_drift_bound(nf: &NormalFormResult<f64>, radius: f64, t_max: f64) -> DriftBound {
    let rem = nf.remainder_majorant(radius);
    let field = nf.remainder_vector_field_majorant(radius);
    let displacement = nf.displacement_at(radius);
    let horizon = if rem > 0.0 { t_max.min(0.1 / rem) } else { t_max };
    DriftBound {
        m: nf.m,
        radius,
        horizon,
        remainder_majorant: rem,
        remainder_field_majorant: field,
        displacement,
        bound: 10.0 * field * horizon + 2.0 * displacement,
    }
}
