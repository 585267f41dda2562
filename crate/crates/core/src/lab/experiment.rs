//! Experiment specifications and runners.
//!
//! Every runner is a pure function of its spec: it returns the artifact
//! files in memory, in a fixed order, and [`Artifacts::write_to`] puts them
//! on disk. Floats are printed with Rust's shortest round-trip formatting.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::birkhoff::{normal_form_family, BirkhoffConfig, Direction};
use crate::diophantine::{check_nonresonant, estimate_gamma};
use crate::dynamics::{ensemble_drift, EnsembleOptions, EnsembleSummary, IntegratorConfig, Scaling};
use crate::error::{Error, Result};
use crate::lab::generate::{generate_random_hamiltonian, AlphaMode, RandomHamiltonianParams};
use crate::lab::rng::CounterRng;
use crate::model::{euclidean_norm, EllipticHamiltonian};
use crate::poly::{paired_part, Polynomial};
use crate::sdm::{check_sdm_quadratic, prevalence_estimate, PrevalenceConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    RemainderScaling,
    DriftVsRho,
    SdmPrevalence,
    ConvexVsGeneric,
    BnfRoundtrip,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::RemainderScaling => "remainder_scaling",
            ExperimentKind::DriftVsRho => "drift_vs_rho",
            ExperimentKind::SdmPrevalence => "sdm_prevalence",
            ExperimentKind::ConvexVsGeneric => "convex_vs_generic",
            ExperimentKind::BnfRoundtrip => "bnf_roundtrip",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum HamiltonianSource {
    /// A serialized `EllipticHamiltonian`.
    Explicit { value: Value },
    Generated { params: RandomHamiltonianParams },
}

impl HamiltonianSource {
    pub fn build(&self) -> Result<EllipticHamiltonian> {
        match self {
            HamiltonianSource::Explicit { value } => EllipticHamiltonian::from_json(value),
            HamiltonianSource::Generated { params } => generate_random_hamiltonian(params),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Knobs {
    /// Decreasing list of scalings.
    pub rho: Vec<f64>,
    pub m_min: u32,
    pub m_max: u32,
    /// Radius for remainder majorants; `None` means `3s/4` (or `s/4` for
    /// sample points in `bnf_roundtrip`).
    pub radius: Option<f64>,
    /// Diophantine exponent for `γ̂`.
    pub tau: f64,
    /// Shell bound for `γ̂`; `None` means `2 m_max`.
    pub k_max: Option<u64>,
    pub n: usize,
    pub l_max: u32,
    pub gamma_p: Vec<f64>,
    pub tau_p: f64,
    pub samples: usize,
    pub n_traj: usize,
    pub t_max: f64,
    pub integrator: IntegratorConfig,
    pub sample_stride: u64,
    pub escape_factor: f64,
    pub scaling: Scaling,
    pub points: usize,
}

impl Default for Knobs {
    fn default() -> Self {
        Self {
            rho: vec![0.2, 0.1, 0.05, 0.025],
            m_min: 2,
            m_max: 8,
            radius: None,
            tau: 1.0,
            k_max: None,
            n: 2,
            l_max: 3,
            gamma_p: vec![0.1, 0.05, 0.025],
            tau_p: 6.0,
            samples: 10_000,
            n_traj: 32,
            t_max: 1e3,
            integrator: IntegratorConfig::default(),
            sample_stride: 1000,
            escape_factor: 2.0,
            scaling: Scaling::A,
            points: 16,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hamiltonian: Option<HamiltonianSource>,
    #[serde(default)]
    pub knobs: Knobs,
    #[serde(default)]
    pub seed: u64,
    /// Output directory (the CLI default is the working directory).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
}

impl ExperimentSpec {
    pub fn new(kind: ExperimentKind, seed: u64) -> Self {
        Self {
            kind,
            hamiltonian: None,
            knobs: Knobs::default(),
            seed,
            output: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let k = &self.knobs;
        let uses_rho = !matches!(self.kind, ExperimentKind::SdmPrevalence | ExperimentKind::BnfRoundtrip);
        if uses_rho {
            if k.rho.is_empty() || k.rho.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
                return Err(Error::invalid("rho grid must be non-empty and positive"));
            }
            if k.rho.windows(2).any(|w| !(w[1] < w[0])) {
                return Err(Error::invalid("rho grid must be strictly decreasing"));
            }
        }
        if k.m_min < 2 || k.m_min > k.m_max {
            return Err(Error::invalid("need 2 <= m_min <= m_max"));
        }
        if let Some(r) = k.radius {
            if !(r > 0.0) {
                return Err(Error::invalid("radius must be positive"));
            }
        }
        if !(k.tau >= 0.0) {
            return Err(Error::invalid("tau must be non-negative"));
        }
        if k.gamma_p.iter().any(|g| !(0.0..=1.0).contains(g)) {
            return Err(Error::invalid("gamma' values must lie in [0, 1]"));
        }
        if !(k.tau_p >= 2.0) {
            return Err(Error::invalid("tau' must be at least 2"));
        }
        if k.n == 0 || k.n > 4 {
            return Err(Error::invalid("n must lie in 1..=4"));
        }
        if k.n_traj == 0 || k.points == 0 {
            return Err(Error::invalid("N and points must be positive"));
        }
        if !(k.t_max > 0.0 && k.t_max.is_finite()) || !(k.escape_factor > 0.0) {
            return Err(Error::invalid("T and escape factor must be positive"));
        }
        if k.sample_stride == 0 {
            return Err(Error::invalid("sample_stride must be positive"));
        }
        k.integrator.validate()?;
        if let Some(HamiltonianSource::Generated { params }) = &self.hamiltonian {
            params.validate()?;
        }
        Ok(())
    }

    fn hamiltonian(&self) -> Result<EllipticHamiltonian> {
        match &self.hamiltonian {
            Some(src) => src.build(),
            None => {
                let mut p = RandomHamiltonianParams::new(self.knobs.n, AlphaMode::GoldenFamily, self.seed);
                p.coefficient_scale = 1.0;
                generate_random_hamiltonian(&p)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Artifacts {
    pub files: Vec<Artifact>,
    /// Headline numbers, also written as `<kind>.summary.json`.
    pub summary: Value,
}

impl Artifacts {
    fn push(&mut self, name: impl Into<String>, contents: String) {
        self.files.push(Artifact {
            name: name.into(),
            contents,
        });
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.files.iter().find(|a| a.name == name).map(|a| a.contents.as_str())
    }

    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for a in &self.files {
            std::fs::write(dir.join(&a.name), &a.contents)?;
        }
        Ok(())
    }
}

/// Least-squares line `y = slope·x + intercept`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<LinearFit> {
    let n = x.len();
    if n < 2 || n != y.len() {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Some(LinearFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
    })
}

fn csv_string(header: &[String], rows: &[Vec<String>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e.to_string()));
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(r).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn header(cols: &[&str]) -> Vec<String> {
    cols.iter().map(|s| s.to_string()).collect()
}

fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn json_num(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json values serialize");
    s.push('\n');
    s
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<Artifacts> {
    spec.validate()?;
    let mut out = match spec.kind {
        ExperimentKind::RemainderScaling => run_remainder_scaling(spec)?,
        ExperimentKind::DriftVsRho => run_drift_vs_rho(spec)?,
        ExperimentKind::SdmPrevalence => run_sdm_prevalence(spec)?,
        ExperimentKind::ConvexVsGeneric => run_convex_vs_generic(spec)?,
        ExperimentKind::BnfRoundtrip => run_bnf_roundtrip(spec)?,
    };
    let name = spec.kind.name();
    let summary = json!({
        "kind": name,
        "seed": spec.seed,
        "spec": serde_json::to_value(spec)?,
        "results": out.summary.clone(),
    });
    out.push(format!("{name}.summary.json"), pretty(&summary));
    out.summary = summary;
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalingRow {
    pub rho: f64,
    pub best_m: u32,
    pub best_remainder: f64,
    /// `(γ̂/ρ)^{1/(τ+1)}`.
    pub u: f64,
    /// `log(best_remainder / ρ)`.
    pub log_ratio: f64,
}

pub fn run_remainder_scaling(spec: &ExperimentSpec) -> Result<Artifacts> {
    let k = &spec.knobs;
    let h = spec.hamiltonian()?;
    let alpha = h.alpha_f64();
    let report = check_nonresonant(&alpha, 2 * k.m_max)?;
    if let Some(w) = report.witness {
        return Err(Error::ResonantFrequency { k: w, value: 0.0 });
    }
    let k_max = k.k_max.unwrap_or(2 * u64::from(k.m_max));
    let gamma = estimate_gamma(&alpha, k.tau, k_max)?;
    let integrable = h.perturbation().is_zero();
    let cfg = BirkhoffConfig::default();

    let mut rows = Vec::new();
    let mut table = Vec::new();
    for &rho in &k.rho {
        let hs = h.scaled(&rho, -2)?;
        let radius = k.radius.unwrap_or(0.75 * hs.s());
        let family = normal_form_family(&hs, k.m_min, k.m_max, &cfg)?;
        let mut best = (0u32, f64::INFINITY);
        for nf in &family {
            let r = nf.remainder_majorant(radius);
            if r < best.1 {
                best = (nf.m, r);
            }
            rows.push(vec![
                num(rho),
                nf.m.to_string(),
                nf.d_work.to_string(),
                num(r),
                num(nf.tail_bound_at(radius)),
                opt_num(nf.smallest_divisor),
            ]);
        }
        if best.0 == 0 {
            // all majorants infinite or the family is empty
            best.0 = k.m_min;
        }
        let u = (gamma.gamma_hat / rho).powf(1.0 / (k.tau + 1.0));
        table.push(ScalingRow {
            rho,
            best_m: best.0,
            best_remainder: best.1,
            u,
            log_ratio: (best.1 / rho).ln(),
        });
    }

    let monotone_remainder = table.windows(2).all(|w| w[1].best_remainder <= w[0].best_remainder);
    let monotone_m = table.windows(2).all(|w| w[1].best_m >= w[0].best_m);
    let fit = if integrable {
        None
    } else {
        let usable: Vec<&ScalingRow> = table.iter().filter(|r| r.log_ratio.is_finite()).collect();
        linear_fit(
            &usable.iter().map(|r| r.u).collect::<Vec<_>>(),
            &usable.iter().map(|r| r.log_ratio).collect::<Vec<_>>(),
        )
    };

    let mut art = Artifacts::default();
    let name = spec.kind.name();
    art.push(
        format!("{name}.csv"),
        csv_string(
            &header(&["rho", "m", "D_work", "remainder_majorant", "tail_bound", "smallest_divisor"]),
            &rows,
        )?,
    );
    let best_rows: Vec<Vec<String>> = table
        .iter()
        .map(|r| {
            vec![
                num(r.rho),
                r.best_m.to_string(),
                num(r.best_remainder),
                num(r.u),
                num(r.log_ratio),
            ]
        })
        .collect();
    art.push(
        format!("{name}.best.csv"),
        csv_string(&header(&["rho", "best_m", "best_remainder", "u", "log_ratio"]), &best_rows)?,
    );
    art.push(
        format!("{name}.gp"),
        format!(
            "set datafile separator ','\nset key autotitle columnhead\nset xlabel '(gamma/rho)^(1/(tau+1))'\n\
             set ylabel 'log(min_m remainder / rho)'\nf(x) = a*x + b\n{}\
             plot '{name}.best.csv' using 4:5 with linespoints title 'measured'{}\n",
            fit.map(|f| format!("a = {}\nb = {}\n", f.slope, f.intercept)).unwrap_or_default(),
            if fit.is_some() { ", f(x) title 'fit'" } else { "" }
        ),
    );
    art.summary = json!({
        "integrable": integrable,
        "gamma_hat": gamma.gamma_hat,
        "tau": k.tau,
        "K": k_max,
        "regressor": "u = (gamma_hat/rho)^(1/(tau+1))",
        "response": "log(min_m remainder_majorant / rho)",
        "fit": fit.map(|f| json!({"slope": f.slope, "intercept": f.intercept, "r_squared": f.r_squared})),
        "monotone_min_remainder": monotone_remainder,
        "optimal_m_non_decreasing": monotone_m,
        "rows": table.iter().map(|r| json!({
            "rho": r.rho, "best_m": r.best_m, "best_remainder": json_num(r.best_remainder),
            "u": r.u, "log_ratio": json_num(r.log_ratio),
        })).collect::<Vec<_>>(),
    });
    Ok(art)
}

fn ensemble_opts(k: &Knobs) -> EnsembleOptions {
    EnsembleOptions {
        scaling: k.scaling,
        sample_stride: k.sample_stride,
        escape_factor: k.escape_factor,
    }
}

fn summary_json(s: &EnsembleSummary) -> Value {
    json!({
        "rho": s.rho,
        "N": s.n_trajectories,
        "T": s.t_max,
        "escape_threshold": s.escape_threshold,
        "max_drift": json_num(s.max_drift),
        "median_drift": json_num(s.median_drift),
        "escape_count": s.escape_count,
        "first_escape_time": s.first_escape_time,
        "aborted_count": s.aborted_count,
        "error_count": s.error_count,
    })
}

/// Per-sample rows `trajectory_id, t, I_1..I_n, H, drift_l1`.
pub fn drift_samples_csv(s: &EnsembleSummary, n: usize) -> Result<String> {
    let mut cols = vec!["trajectory_id".to_string(), "t".to_string()];
    cols.extend((1..=n).map(|i| format!("I_{i}")));
    cols.push("H".into());
    cols.push("drift_l1".into());
    let mut rows = Vec::new();
    for t in &s.trajectories {
        let Some(rec) = &t.record else { continue };
        let drifts = rec.drift_at_samples();
        for (j, time) in rec.sample_times.iter().enumerate() {
            let mut row = vec![t.index.to_string(), num(*time)];
            row.extend(rec.actions[j].iter().map(|a| num(*a)));
            row.push(num(rec.energies[j]));
            row.push(num(drifts[j]));
            rows.push(row);
        }
    }
    csv_string(&cols, &rows)
}

/// Per-trajectory rows.
pub fn drift_trajectories_csv(list: &[&EnsembleSummary]) -> Result<String> {
    let mut rows = Vec::new();
    for s in list {
        for t in &s.trajectories {
            let (drift, esc, aborted, t_end) = match &t.record {
                Some(r) => (
                    num(r.max_drift_l1),
                    opt_num(r.escape_time),
                    r.aborted.map(|a| format!("{a:?}")).unwrap_or_default(),
                    num(r.t_end),
                ),
                None => Default::default(),
            };
            rows.push(vec![
                num(s.rho),
                t.index.to_string(),
                drift,
                esc,
                t_end,
                aborted,
                t.error.clone().unwrap_or_default(),
            ]);
        }
    }
    csv_string(
        &header(&["rho", "trajectory_id", "max_drift_l1", "escape_time", "t_end", "aborted", "error"]),
        &rows,
    )
}

pub fn run_drift_vs_rho(spec: &ExperimentSpec) -> Result<Artifacts> {
    let k = &spec.knobs;
    let h = spec.hamiltonian()?;
    let opts = ensemble_opts(k);
    let mut runs = Vec::new();
    for &rho in &k.rho {
        runs.push(ensemble_drift(&h, rho, k.n_traj, k.t_max, &k.integrator, spec.seed, &opts)?);
    }
    let name = spec.kind.name();
    let mut art = Artifacts::default();
    let rows: Vec<Vec<String>> = runs
        .iter()
        .map(|s| {
            vec![
                num(s.rho),
                num(s.max_drift),
                num(s.median_drift),
                s.escape_count.to_string(),
                opt_num(s.first_escape_time),
                s.aborted_count.to_string(),
                s.error_count.to_string(),
            ]
        })
        .collect();
    art.push(
        format!("{name}.csv"),
        csv_string(
            &header(&[
                "rho",
                "max_drift",
                "median_drift",
                "escape_count",
                "first_escape_time",
                "aborted_count",
                "error_count",
            ]),
            &rows,
        )?,
    );
    art.push(
        format!("{name}.trajectories.csv"),
        drift_trajectories_csv(&runs.iter().collect::<Vec<_>>())?,
    );
    art.push(
        format!("{name}.gp"),
        format!(
            "set datafile separator ','\nset key autotitle columnhead\nset logscale xy\n\
             set xlabel 'rho'\nset ylabel 'action drift (scaled)'\n\
             plot '{name}.csv' using 1:2 with linespoints title 'max', '' using 1:3 with linespoints title 'median'\n"
        ),
    );
    let drifts: Vec<f64> = runs.iter().map(|s| s.max_drift).collect();
    art.summary = json!({
        "hamiltonian": h.to_json(),
        "rows": runs.iter().map(summary_json).collect::<Vec<_>>(),
        "max_drift_decreasing_in_rho": drifts.windows(2).all(|w| w[1] < w[0]),
    });
    Ok(art)
}

pub fn run_sdm_prevalence(spec: &ExperimentSpec) -> Result<Artifacts> {
    let k = &spec.knobs;
    let mut reports = Vec::new();
    for &g in &k.gamma_p {
        reports.push(prevalence_estimate(
            k.n,
            k.tau_p,
            g,
            k.l_max,
            k.samples,
            spec.seed,
            &PrevalenceConfig::default(),
        )?);
    }
    let name = spec.kind.name();
    let mut art = Artifacts::default();
    let rows: Vec<Vec<String>> = reports
        .iter()
        .map(|r| {
            vec![
                num(r.gamma_p),
                num(r.bad_fraction),
                r.bad_count.to_string(),
                num(r.sigma),
                num(r.ci_low),
                num(r.ci_high),
                num(r.paper_bound),
                num(r.paper_series_bound),
                num(r.union_bound),
                num(r.exact_fraction),
                num(r.random_bad_fraction),
            ]
        })
        .collect();
    art.push(
        format!("{name}.csv"),
        csv_string(
            &header(&[
                "gamma_p",
                "bad_fraction",
                "bad_count",
                "sigma",
                "ci_low",
                "ci_high",
                "truncated_bound",
                "series_bound",
                "union_bound",
                "exact_fraction",
                "random_bad_fraction",
            ]),
            &rows,
        )?,
    );
    art.push(
        format!("{name}.gp"),
        format!(
            "set datafile separator ','\nset key autotitle columnhead\nset xlabel \"gamma'\"\n\
             set ylabel 'bad fraction'\n\
             plot '{name}.csv' using 1:2 with points title 'Monte Carlo', '' using 1:7 with lines title 'truncated bound', \
             '' using 1:9 with lines title 'union bound'\n"
        ),
    );
    art.summary = json!({
        "reports": reports.iter().map(serde_json::to_value).collect::<std::result::Result<Vec<_>, _>>()?,
    });
    Ok(art)
}

fn is_indefinite(b: &[Vec<f64>]) -> Result<bool> {
    let m = crate::sdm::symmetric_matrix(b)?;
    let ev = crate::sdm::symmetric_eigenvalues(&m);
    Ok(ev.iter().any(|&x| x > 0.0) && ev.iter().any(|&x| x < 0.0))
}

/// First indefinite `β` (entries uniform on `[−1, 1]`) from stream 7 of
/// `seed` that passes the quadratic check.
pub fn indefinite_sdm_passing_beta(
    alpha: &[f64],
    seed: u64,
    gamma_p: f64,
    tau_p: f64,
    l_max: u32,
) -> Result<Vec<Vec<f64>>> {
    let n = alpha.len();
    let mut rng = CounterRng::new(seed, 7);
    for _ in 0..1000 {
        let mut b = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in i..n {
                let x = rng.uniform(-1.0, 1.0);
                b[i][j] = x;
                b[j][i] = x;
            }
        }
        if is_indefinite(&b)? && check_sdm_quadratic(alpha, &b, gamma_p, tau_p, l_max)?.passed {
            return Ok(b);
        }
    }
    Err(Error::invalid("no indefinite SDM-passing beta found in 1000 draws"))
}

pub fn run_convex_vs_generic(spec: &ExperimentSpec) -> Result<Artifacts> {
    let k = &spec.knobs;
    let base = spec.hamiltonian()?;
    let n = base.dimension();
    let alpha = base.alpha_f64();
    let v = base.perturbation();
    let f = v.checked_sub(&paired_part(&v.homogeneous_part(4))?)?;
    let gamma_p = k.gamma_p.first().copied().unwrap_or(0.05);

    let identity: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| f64::from(i == j)).collect()).collect();
    let generic = indefinite_sdm_passing_beta(&alpha, spec.seed, gamma_p, k.tau_p, k.l_max)?;
    let failing: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { if i % 2 == 0 { 1.0 } else { -1.0 } } else { 0.0 }).collect())
        .collect();
    let configs = [
        ("sign_definite", identity),
        ("indefinite_sdm_pass", generic),
        ("sdm_fail", failing),
    ];
    let rho = k.rho[0];
    let opts = ensemble_opts(k);
    let mut rows = Vec::new();
    let mut summary_rows = Vec::new();
    for (label, beta) in &configs {
        let verdict = check_sdm_quadratic(&alpha, beta, gamma_p, k.tau_p, k.l_max)?;
        let h = EllipticHamiltonian::with_beta(alpha.clone(), beta, f.clone(), base.s())?;
        let s = ensemble_drift(&h, rho, k.n_traj, k.t_max, &k.integrator, spec.seed, &opts)?;
        let beta_str = serde_json::to_string(beta)?;
        rows.push(vec![
            label.to_string(),
            beta_str,
            verdict.passed.to_string(),
            num(verdict.gamma_margin),
            verdict.worst_case.as_ref().map(|w| w.l.to_string()).unwrap_or_default(),
            num(rho),
            num(s.max_drift),
            num(s.median_drift),
            s.escape_count.to_string(),
        ]);
        summary_rows.push(json!({
            "config": label,
            "beta": beta,
            "sdm_passed": verdict.passed,
            "sdm_margin": json_num(verdict.gamma_margin),
            "ensemble": summary_json(&s),
        }));
    }
    let name = spec.kind.name();
    let mut art = Artifacts::default();
    art.push(
        format!("{name}.csv"),
        csv_string(
            &header(&[
                "config",
                "beta",
                "sdm_passed",
                "sdm_margin",
                "witness_L",
                "rho",
                "max_drift",
                "median_drift",
                "escape_count",
            ]),
            &rows,
        )?,
    );
    art.push(
        format!("{name}.gp"),
        format!(
            "set datafile separator ','\nset key autotitle columnhead\nset style data histograms\n\
             set style fill solid\nset ylabel 'max action drift (scaled)'\n\
             plot '{name}.csv' using 7:xtic(1) title 'max drift'\n"
        ),
    );
    art.summary = json!({ "gamma_p": gamma_p, "tau_p": k.tau_p, "L_max": k.l_max, "rows": summary_rows });
    Ok(art)
}

pub fn run_bnf_roundtrip(spec: &ExperimentSpec) -> Result<Artifacts> {
    let k = &spec.knobs;
    let h = spec.hamiltonian()?;
    let n = h.dimension();
    let nf = normal_form_family(&h, k.m_max, k.m_max, &BirkhoffConfig::default())?
        .pop()
        .expect("family has one entry");
    let radius = k.radius.unwrap_or(0.25 * h.s());
    let ev = h.evaluator();
    let mut rng = CounterRng::new(spec.seed, 3);
    let mut rows = Vec::new();
    let (mut worst_rt, mut worst_conj) = (0.0f64, 0.0f64);
    for i in 0..k.points {
        // uniform direction, radius uniform in [0, radius)
        let mut z: Vec<f64> = (0..2 * n).map(|_| rng.normal()).collect();
        let scale = rng.uniform(0.0, radius) / euclidean_norm(&z).max(f64::MIN_POSITIVE);
        z.iter_mut().for_each(|x| *x *= scale);
        let w = nf.apply_transform(&z, Direction::Forward)?;
        let back = nf.apply_transform(&w, Direction::Inverse)?;
        let rt = z.iter().zip(&back).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let conj = (ev.value(&w) - nf.normal_form_value(&z)).abs();
        worst_rt = worst_rt.max(rt);
        worst_conj = worst_conj.max(conj);
        rows.push(vec![i.to_string(), num(euclidean_norm(&z)), num(rt), num(conj)]);
    }
    let name = spec.kind.name();
    let mut art = Artifacts::default();
    art.push(
        format!("{name}.csv"),
        csv_string(&header(&["point_id", "norm", "roundtrip_error", "conjugacy_error"]), &rows)?,
    );
    let inv: Vec<Vec<String>> = nf
        .invariant_table()
        .into_iter()
        .map(|(kk, c)| vec![serde_json::to_string(&kk).expect("ints serialize"), num(c)])
        .collect();
    art.push(format!("{name}.invariants.csv"), csv_string(&header(&["k", "coefficient"]), &inv)?);
    art.push(
        format!("{name}.gp"),
        format!(
            "set datafile separator ','\nset key autotitle columnhead\nset logscale y\nset xlabel '|z|'\n\
             plot '{name}.csv' using 2:3 with points title 'round trip', '' using 2:4 with points title 'conjugacy'\n"
        ),
    );
    art.summary = json!({
        "m": nf.m,
        "D_work": nf.d_work,
        "radius": radius,
        "max_roundtrip_error": worst_rt,
        "max_conjugacy_error": worst_conj,
        "tail_bound": json_num(nf.tail_bound_at(radius)),
        "remainder_majorant": json_num(nf.remainder_majorant(radius)),
        "normal_form": nf.to_json(radius),
    });
    Ok(art)
}

/// Zero perturbation helper used by tests and the CLI.
pub fn harmonic(alpha: Vec<f64>, s: f64) -> Result<EllipticHamiltonian> {
    let n = alpha.len();
    EllipticHamiltonian::new(alpha, Polynomial::zero(n), s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_round_trip() {
        let mut spec = ExperimentSpec::new(ExperimentKind::DriftVsRho, 7);
        spec.knobs.rho = vec![0.3, 0.1];
        spec.hamiltonian = Some(HamiltonianSource::Generated {
            params: RandomHamiltonianParams::new(2, AlphaMode::GoldenFamily, 3),
        });
        let text = serde_json::to_string(&spec).unwrap();
        let back: ExperimentSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back, spec);
        assert_eq!(serde_json::to_string(&back).unwrap(), text);
    }

    #[test]
    fn spec_defaults_and_validation() {
        let spec: ExperimentSpec = serde_json::from_str(r#"{"kind": "sdm_prevalence"}"#).unwrap();
        assert_eq!(spec.knobs, Knobs::default());
        assert!(spec.validate().is_ok());
        let bad: ExperimentSpec =
            serde_json::from_str(r#"{"kind": "drift_vs_rho", "knobs": {"rho": [0.1, 0.2]}}"#).unwrap();
        assert!(bad.validate().is_err());
        assert!(serde_json::from_str::<ExperimentSpec>(r#"{"kind": "x"}"#).is_err());
    }

    #[test]
    fn fit_recovers_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| -2.0 * v + 0.5).collect();
        let f = linear_fit(&x, &y).unwrap();
        assert!((f.slope + 2.0).abs() < 1e-12 && (f.intercept - 0.5).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        assert!(linear_fit(&[1.0], &[1.0]).is_none());
    }

    #[test]
    fn integrable_scaling_skips_fit() {
        let mut spec = ExperimentSpec::new(ExperimentKind::RemainderScaling, 1);
        spec.knobs.m_max = 3;
        spec.hamiltonian = Some(HamiltonianSource::Explicit {
            value: harmonic(vec![1.0, 2f64.sqrt()], 4.0).unwrap().to_json(),
        });
        let out = run_experiment(&spec).unwrap();
        let r = &out.summary["results"];
        assert_eq!(r["integrable"], json!(true));
        assert!(r["fit"].is_null());
        for row in r["rows"].as_array().unwrap() {
            assert_eq!(row["best_remainder"], json!(0.0));
        }
    }
}
