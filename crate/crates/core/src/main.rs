use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use hamlab::birkhoff::{birkhoff_normal_form, remainder_curve, BirkhoffConfig};
use hamlab::diophantine::{check_nonresonant, estimate_gamma, fit_tau};
use hamlab::dynamics::{
    ensemble_drift, escape_time_scan, EnsembleOptions, IntegratorConfig, Method, Scaling,
};
use hamlab::lab::experiment::{drift_samples_csv, drift_trajectories_csv};
use hamlab::lab::{
    generate_random_hamiltonian, run_experiment, AlphaMode, BetaSpec, ExperimentSpec, RandomHamiltonianParams,
};
use hamlab::model::EllipticHamiltonian;
use hamlab::poly::ActionPolynomial;
use hamlab::scalar::Rational;
use hamlab::sdm::{
    check_sdm_polynomial, check_sdm_quadratic, enumerate_gl, prevalence_estimate, Ball, PrevalenceConfig,
};
use hamlab::{Error, Result};

#[derive(Parser)]
#[command(name = "hamlab", version, about = "Normal forms, genericity checks and drift experiments near elliptic fixed points")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    ImplicitMidpoint,
    Gauss4,
    Rk4,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::ImplicitMidpoint => Method::ImplicitMidpoint,
            MethodArg::Gauss4 => Method::Gauss4,
            MethodArg::Rk4 => Method::Rk4,
        }
    }
}

#[derive(clap::Args)]
struct IntegratorArgs {
    #[arg(long, default_value_t = 1e-2)]
    dt: f64,
    #[arg(long, value_enum, default_value = "implicit-midpoint")]
    method: MethodArg,
    #[arg(long, default_value_t = 1e-3)]
    energy_abort: f64,
    /// Use the `ρ^{-4}` scaling (frequencies grow like `ρ^{-2}`).
    #[arg(long)]
    setting_b: bool,
    #[arg(long, default_value_t = 1000)]
    stride: u64,
}

impl IntegratorArgs {
    fn config(&self) -> IntegratorConfig {
        IntegratorConfig {
            method: self.method.into(),
            dt: self.dt,
            energy_abort_threshold: self.energy_abort,
            ..IntegratorConfig::default()
        }
    }

    fn options(&self, escape_factor: f64) -> EnsembleOptions {
        EnsembleOptions {
            scaling: if self.setting_b { Scaling::B } else { Scaling::A },
            sample_stride: self.stride,
            escape_factor,
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Birkhoff normal form to order 2m.
    Bnf {
        #[arg(long)]
        ham: PathBuf,
        #[arg(long)]
        m: u32,
        #[arg(long)]
        d_work: Option<u32>,
        /// Rational arithmetic (coefficients must be exact).
        #[arg(long)]
        exact: bool,
        #[arg(long)]
        radius: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Remainder majorant against m.
    BnfCurve {
        #[arg(long)]
        ham: PathBuf,
        #[arg(long)]
        m_max: u32,
        #[arg(long)]
        radius: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Small-divisor statistics of a frequency vector.
    Dioph {
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        alpha: Vec<f64>,
        #[arg(long, default_value_t = 1.0)]
        tau: f64,
        #[arg(long = "K", default_value_t = 20)]
        k_max: u64,
        #[arg(long)]
        fit_tau: bool,
    },
    /// Quadratic (`--beta`) or polynomial (`--h`) SDM check.
    SdmCheck {
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        alpha: Vec<f64>,
        /// Symmetric matrix as JSON, e.g. `[[1,0],[0,-1]]`.
        #[arg(long, allow_hyphen_values = true)]
        beta: Option<String>,
        /// Action polynomial JSON file.
        #[arg(long)]
        h: Option<PathBuf>,
        #[arg(long = "gamma-p")]
        gamma_p: f64,
        #[arg(long = "tau-p")]
        tau_p: f64,
        #[arg(long = "L-max", default_value_t = 3)]
        l_max: u32,
        #[arg(long, default_value_t = 8)]
        grid: usize,
        #[arg(long, default_value_t = 2.0)]
        ball_radius: f64,
    },
    /// Rational subspaces of height at most L.
    SdmEnum {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        #[arg(long = "L")]
        l: u32,
    },
    /// Monte-Carlo estimate of the SDM-failing measure along `β₀ − ξI`.
    SdmPrevalence {
        #[arg(long, default_value_t = 2)]
        n: usize,
        #[arg(long = "tau-p")]
        tau_p: f64,
        #[arg(long = "gamma-p")]
        gamma_p: f64,
        #[arg(long = "L-max", default_value_t = 3)]
        l_max: u32,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Ensemble drift in scaled variables.
    Drift {
        #[arg(long)]
        ham: PathBuf,
        #[arg(long)]
        rho: f64,
        #[arg(long = "N", default_value_t = 32)]
        n_traj: usize,
        #[arg(long = "T")]
        t_max: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 2.0)]
        escape_factor: f64,
        #[command(flatten)]
        integ: IntegratorArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Escape times over a decreasing list of ρ.
    EscapeScan {
        #[arg(long)]
        ham: PathBuf,
        #[arg(long, value_delimiter = ',')]
        rho: Vec<f64>,
        #[arg(long, default_value_t = 2.0)]
        factor: f64,
        #[arg(long = "T")]
        t_max: f64,
        #[arg(long = "N", default_value_t = 16)]
        n_traj: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        integ: IntegratorArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Runs an experiment spec and writes its artifacts.
    Experiment {
        #[arg(long)]
        spec: PathBuf,
        /// Output directory (overrides the spec's `output`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Writes a random Hamiltonian as JSON.
    Generate {
        #[arg(long, default_value_t = 2)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Explicit frequencies; golden family when absent.
        #[arg(long, value_delimiter = ',')]
        alpha: Option<Vec<f64>>,
        #[arg(long, default_value_t = 3)]
        degree_min: u32,
        #[arg(long, default_value_t = 4)]
        degree_max: u32,
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        #[arg(long, default_value_t = 0.5)]
        density: f64,
        /// Embed a random symmetric β as the paired quartic part.
        #[arg(long)]
        random_beta: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn read_json(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => {
            let mut stdout = std::io::stdout().lock();
            // a closed pipe (e.g. `| head`) is not an error
            match stdout.write_all(text.as_bytes()).and_then(|()| stdout.flush()) {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => return Err(e.into()),
                _ => {}
            }
        }
    }
    Ok(())
}

fn emit_json(v: &Value, out: Option<&Path>) -> Result<()> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    emit(&s, out)
}

fn run(cmd: Cmd) -> Result<()> {
    let cfg = BirkhoffConfig::default();
    match cmd {
        Cmd::Bnf {
            ham,
            m,
            d_work,
            exact,
            radius,
            out,
        } => {
            let v = read_json(&ham)?;
            let json = if exact {
                let h = EllipticHamiltonian::<Rational>::from_json(&v)?;
                let r = birkhoff_normal_form(&h, m, d_work, &cfg)?;
                r.to_json(radius.unwrap_or(r.default_radius()))
            } else {
                let h = EllipticHamiltonian::<f64>::from_json(&v)?;
                let r = birkhoff_normal_form(&h, m, d_work, &cfg)?;
                r.to_json(radius.unwrap_or(r.default_radius()))
            };
            emit_json(&json, out.as_deref())
        }
        Cmd::BnfCurve {
            ham,
            m_max,
            radius,
            out,
        } => {
            let h = EllipticHamiltonian::<f64>::from_json(&read_json(&ham)?)?;
            let curve = remainder_curve(&h, m_max, radius.unwrap_or(0.75 * h.s()), &cfg)?;
            emit_json(&serde_json::to_value(curve)?, out.as_deref())
        }
        Cmd::Dioph {
            alpha,
            tau,
            k_max,
            fit_tau: fit,
        } => {
            let est = estimate_gamma(&alpha, tau, k_max)?;
            let res = check_nonresonant(&alpha, k_max as u32)?;
            let mut v = json!({
                "estimate": est,
                "nonresonance": res,
            });
            if fit {
                v["tau_fit"] = serde_json::to_value(fit_tau(&alpha, k_max)?)?;
            }
            emit_json(&v, None)
        }
        Cmd::SdmCheck {
            alpha,
            beta,
            h,
            gamma_p,
            tau_p,
            l_max,
            grid,
            ball_radius,
        } => {
            let verdict = match (beta, h) {
                (Some(b), None) => {
                    let b: Vec<Vec<f64>> = serde_json::from_str(&b)?;
                    check_sdm_quadratic(&alpha, &b, gamma_p, tau_p, l_max)?
                }
                (None, Some(path)) => {
                    let hp = ActionPolynomial::<f64>::from_json(&read_json(&path)?)?;
                    let ball = Ball {
                        center: vec![0.0; hp.dimension()],
                        radius: ball_radius,
                    };
                    check_sdm_polynomial(&hp, &ball, gamma_p, tau_p, l_max, grid)?
                }
                _ => return Err(Error::invalid("give exactly one of --beta and --h")),
            };
            emit_json(&serde_json::to_value(verdict)?, None)
        }
        Cmd::SdmEnum { n, k, l } => {
            let subs = enumerate_gl(n, k, l)?;
            let rows: Vec<Value> = subs
                .iter()
                .map(|s| json!({"height": s.height, "perp_basis": s.perp_basis, "key": s.key.to_string()}))
                .collect();
            emit_json(&json!({"n": n, "k": k, "L": l, "count": rows.len(), "subspaces": rows}), None)
        }
        Cmd::SdmPrevalence {
            n,
            tau_p,
            gamma_p,
            l_max,
            samples,
            seed,
        } => {
            let r = prevalence_estimate(n, tau_p, gamma_p, l_max, samples, seed, &PrevalenceConfig::default())?;
            emit_json(&serde_json::to_value(r)?, None)
        }
        Cmd::Drift {
            ham,
            rho,
            n_traj,
            t_max,
            seed,
            escape_factor,
            integ,
            out,
        } => {
            let h = EllipticHamiltonian::<f64>::from_json(&read_json(&ham)?)?;
            let s = ensemble_drift(&h, rho, n_traj, t_max, &integ.config(), seed, &integ.options(escape_factor))?;
            emit(&drift_samples_csv(&s, h.dimension())?, out.as_deref())?;
            let summary = json!({
                "rho": s.rho, "N": s.n_trajectories, "T": s.t_max, "seed": s.seed,
                "escape_threshold": s.escape_threshold, "max_drift": s.max_drift,
                "median_drift": s.median_drift, "escape_count": s.escape_count,
                "first_escape_time": s.first_escape_time, "aborted_count": s.aborted_count,
                "error_count": s.error_count,
            });
            if let Some(p) = out {
                let stem = p.with_extension("");
                let name = stem.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                let dir = p.parent().unwrap_or(Path::new("."));
                std::fs::write(dir.join(format!("{name}.trajectories.csv")), drift_trajectories_csv(&[&s])?)?;
                emit_json(&summary, None)
            } else {
                eprintln!("{summary}");
                Ok(())
            }
        }
        Cmd::EscapeScan {
            ham,
            rho,
            factor,
            t_max,
            n_traj,
            seed,
            integ,
            out,
        } => {
            let h = EllipticHamiltonian::<f64>::from_json(&read_json(&ham)?)?;
            let scan = escape_time_scan(&h, &rho, factor, t_max, &integ.config(), n_traj, seed, &integ.options(factor))?;
            let mut w = csv::Writer::from_writer(Vec::new());
            let io = |e: csv::Error| Error::Io(std::io::Error::other(e.to_string()));
            w.write_record(["rho", "escape_time", "censored", "max_drift", "escape_count", "local_slope"])
                .map_err(io)?;
            for r in &scan.rows {
                w.write_record([
                    r.rho.to_string(),
                    r.escape_time.map(|t| t.to_string()).unwrap_or_default(),
                    r.censored.to_string(),
                    r.max_drift.to_string(),
                    r.escape_count.to_string(),
                    r.local_slope.map(|t| t.to_string()).unwrap_or_default(),
                ])
                .map_err(io)?;
            }
            let bytes = w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
            emit(&String::from_utf8_lossy(&bytes), out.as_deref())
        }
        Cmd::Experiment { spec, out } => {
            let spec: ExperimentSpec = serde_json::from_value(read_json(&spec)?)
                .map_err(|e| Error::invalid(format!("experiment spec: {e}")))?;
            let dir = out
                .or_else(|| spec.output.as_ref().map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from("."));
            let art = run_experiment(&spec)?;
            art.write_to(&dir)?;
            let files: Vec<String> = art.files.iter().map(|a| dir.join(&a.name).display().to_string()).collect();
            emit_json(&json!({"kind": spec.kind.name(), "files": files}), None)
        }
        Cmd::Generate {
            n,
            seed,
            alpha,
            degree_min,
            degree_max,
            scale,
            density,
            random_beta,
            out,
        } => {
            let mode = match alpha {
                Some(alpha) => AlphaMode::Explicit { alpha },
                None => AlphaMode::GoldenFamily,
            };
            let mut p = RandomHamiltonianParams::new(n, mode, seed);
            p.degree_min = degree_min;
            p.degree_max = degree_max;
            p.coefficient_scale = scale;
            p.density = density;
            if random_beta {
                p.include_beta = Some(BetaSpec::Random);
            }
            let h = generate_random_hamiltonian(&p)?;
            emit_json(&h.to_json(), out.as_deref())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Ok(t) = std::env::var("HAMLAB_THREADS") {
        match t.parse::<usize>() {
            Ok(k) if k > 0 => {
                // only fails if a pool already exists
                let _ = rayon::ThreadPoolBuilder::new().num_threads(k).build_global();
            }
            _ => {
                eprintln!("{}", json!({"error": "invalid_input", "message": format!("HAMLAB_THREADS={t} is not a positive integer")}));
                return ExitCode::from(2);
            }
        }
    }
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", json!({"error": e.kind(), "message": e.to_string()}));
            ExitCode::from(if e.is_validation() { 2 } else { 3 })
        }
    }
}
