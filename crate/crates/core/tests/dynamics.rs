use hamlab::dynamics::{
    ensemble_drift, ensemble_point, integrate, scaled_hamiltonian, EnsembleOptions, IntegratorConfig, Method,
    Scaling, Stepper,
};
use hamlab::lab::{generate_random_hamiltonian, AlphaMode, BetaSpec, CounterRng, RandomHamiltonianParams};
use hamlab::model::{formal_actions, EllipticHamiltonian};
use hamlab::poly::Polynomial;

fn harmonic(alpha: Vec<f64>) -> EllipticHamiltonian {
    let n = alpha.len();
    EllipticHamiltonian::new(alpha, Polynomial::zero(n), 4.0).unwrap()
}

fn cubic_quartic(seed: u64, scale: f64) -> EllipticHamiltonian {
    let mut p = RandomHamiltonianParams::new(2, AlphaMode::GoldenFamily, seed);
    p.coefficient_scale = scale;
    p.density = 1.0;
    generate_random_hamiltonian(&p).unwrap()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn harmonic_actions_conserved_over_a_million_steps() {
    let h = harmonic(vec![1.0, (1.0 + 5f64.sqrt()) / 2.0]);
    let z0 = ensemble_point(2, 11, 0);
    let cfg = IntegratorConfig::default();
    let rec = integrate(&h, &z0, &cfg, 1e4, 100_000, None).unwrap();
    assert_eq!(rec.steps, 1_000_000);
    assert!(rec.max_drift_l1 <= 1e-10, "drift {:e}", rec.max_drift_l1);
}

#[test]
fn integrable_action_conserved() {
    // H = Ĩ + Ĩ², whose flow is a rotation with action-dependent speed
    let v = Polynomial::from_terms(1, vec![(vec![4, 0], 0.25), (vec![2, 2], 0.5), (vec![0, 4], 0.25)]).unwrap();
    let h = EllipticHamiltonian::new(vec![1.0], v, 4.0).unwrap();
    let z0 = [0.8, -0.5];
    let rec = integrate(&h, &z0, &IntegratorConfig::default(), 1e3, 10_000, None).unwrap();
    assert_eq!(rec.steps, 100_000);
    assert!(rec.max_drift_l1 <= 1e-9, "drift {:e}", rec.max_drift_l1);
}

#[test]
fn reversibility() {
    let h = scaled_hamiltonian(&cubic_quartic(5, 1.0), 0.1, Scaling::A).unwrap();
    let z0 = ensemble_point(2, 5, 3);
    for method in [Method::ImplicitMidpoint, Method::Gauss4] {
        let mut st = Stepper::new(h.evaluator(), IntegratorConfig::with_method(method, 1e-2)).unwrap();
        let mut z = z0.clone();
        for _ in 0..10_000 {
            st.step(&mut z, 1e-2).unwrap();
        }
        assert!(max_abs_diff(&z, &z0) > 1e-3);
        for _ in 0..10_000 {
            st.step(&mut z, -1e-2).unwrap();
        }
        let err = max_abs_diff(&z, &z0);
        assert!(err <= 1e-8, "{method:?}: {err:e}");
    }
}

fn one_period_error(method: Method, steps: u32) -> f64 {
    let h = harmonic(vec![1.0]);
    let z0 = [0.7, 0.2];
    let dt = std::f64::consts::TAU / f64::from(steps);
    let mut st = Stepper::new(h.evaluator(), IntegratorConfig::with_method(method, dt)).unwrap();
    let mut z = z0.to_vec();
    for _ in 0..steps {
        st.step(&mut z, dt).unwrap();
    }
    max_abs_diff(&z, &z0)
}

#[test]
fn dt_refinement_orders() {
    for (method, expected) in [(Method::ImplicitMidpoint, 4.0), (Method::Gauss4, 16.0)] {
        let ratio = one_period_error(method, 40) / one_period_error(method, 80);
        assert!((ratio / expected - 1.0).abs() <= 0.2, "{method:?}: ratio {ratio}");
    }
}

#[test]
fn flow_is_symplectic() {
    let dt = 1e-3;
    let mut rng = CounterRng::new(2024, 0);
    for case in 0..20u64 {
        let n = 1 + (case % 2) as usize;
        let mut p = RandomHamiltonianParams::new(n, AlphaMode::RandomUnitBox, case);
        p.coefficient_scale = 0.5;
        let h = generate_random_hamiltonian(&p).unwrap();
        let z0: Vec<f64> = (0..2 * n).map(|_| rng.uniform(-0.5, 0.5)).collect();
        let flow = |z: &[f64]| {
            let cfg = IntegratorConfig {
                dt,
                energy_abort_threshold: 1.0,
                ..IntegratorConfig::default()
            };
            integrate(&h, z, &cfg, 1.0, 1000, None).unwrap().final_state
        };
        let d = 2 * n;
        let eps = 1e-5;
        // J[i][j] = ∂φ_i/∂z_j
        let mut jac = vec![vec![0.0; d]; d];
        for j in 0..d {
            let mut zp = z0.clone();
            let mut zm = z0.clone();
            zp[j] += eps;
            zm[j] -= eps;
            let (fp, fm) = (flow(&zp), flow(&zm));
            for i in 0..d {
                jac[i][j] = (fp[i] - fm[i]) / (2.0 * eps);
            }
        }
        let omega = |i: usize, j: usize| {
            if j == i + n && i < n {
                1.0
            } else if i == j + n && j < n {
                -1.0
            } else {
                0.0
            }
        };
        let mut err = 0.0f64;
        for a in 0..d {
            for b in 0..d {
                let mut v = 0.0;
                for i in 0..d {
                    for j in 0..d {
                        v += jac[i][a] * omega(i, j) * jac[j][b];
                    }
                }
                err = err.max((v - omega(a, b)).abs());
            }
        }
        assert!(err <= 1e-5, "case {case}: {err:e}");
    }
}

/// Mean of `H − H(0)` over the first and last tenth of the samples.
fn energy_trend(h: &EllipticHamiltonian, method: Method) -> (f64, f64, f64) {
    let cfg = IntegratorConfig {
        method,
        dt: 1e-2,
        energy_abort_threshold: 1.0,
        ..IntegratorConfig::default()
    };
    let z0 = ensemble_point(2, 17, 0);
    let rec = integrate(h, &z0, &cfg, 1e3, 10, None).unwrap();
    let e0 = rec.energies[0];
    let dev: Vec<f64> = rec.energies[1..].iter().map(|e| e - e0).collect();
    let tenth = dev.len() / 10;
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    let max = dev.iter().map(|x| x.abs()).fold(0.0, f64::max);
    (mean(&dev[..tenth]), mean(&dev[dev.len() - tenth..]), max)
}

#[test]
fn midpoint_energy_bounded_rk4_secular() {
    let mut p = RandomHamiltonianParams::new(2, AlphaMode::GoldenFamily, 8);
    p.degree_max = 3;
    p.density = 1.0;
    let h = scaled_hamiltonian(&generate_random_hamiltonian(&p).unwrap(), 0.1, Scaling::A).unwrap();
    let mid = energy_trend(&h, Method::ImplicitMidpoint);
    let rk = energy_trend(&h, Method::Rk4);
    // trend between the first and last tenth relative to the largest excursion
    let trend = |(first, last, max): (f64, f64, f64)| (last - first).abs() / max;
    assert!(trend(mid) < 0.05, "midpoint {mid:?}");
    assert!(trend(rk) > 0.5, "rk4 {rk:?}");
    assert!(rk.1.abs() > 5.0 * rk.0.abs(), "rk4 {rk:?}");
}

#[test]
fn single_member_ensemble_matches_integrate() {
    let h = cubic_quartic(3, 1.0);
    let cfg = IntegratorConfig::default();
    let opts = EnsembleOptions {
        sample_stride: 50,
        ..EnsembleOptions::default()
    };
    let s = ensemble_drift(&h, 0.05, 1, 20.0, &cfg, 99, &opts).unwrap();
    let hs = scaled_hamiltonian(&h, 0.05, Scaling::A).unwrap();
    let z0 = ensemble_point(2, 99, 0);
    let rec = integrate(&hs, &z0, &cfg, 20.0, 50, Some(0.1)).unwrap();
    assert_eq!(s.trajectories[0].z0, z0);
    assert_eq!(s.trajectories[0].record.as_ref(), Some(&rec));
    assert_eq!(s.max_drift, rec.max_drift_l1);
    assert_eq!(s.median_drift, rec.max_drift_l1);
}

#[test]
fn ensembles_are_deterministic_and_start_in_action_simplex() {
    let h = cubic_quartic(4, 1.0);
    let cfg = IntegratorConfig::default();
    let a = ensemble_drift(&h, 0.1, 6, 5.0, &cfg, 1, &EnsembleOptions::default()).unwrap();
    let b = ensemble_drift(&h, 0.1, 6, 5.0, &cfg, 1, &EnsembleOptions::default()).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    for t in &a.trajectories {
        let i: f64 = formal_actions(2, &t.z0).unwrap().iter().sum();
        assert!(i < 1.0);
    }
}

#[test]
fn harmonic_ensemble_drift_at_solver_tolerance() {
    let h = harmonic(vec![1.0, 2f64.sqrt()]);
    let s = ensemble_drift(&h, 0.05, 8, 100.0, &IntegratorConfig::default(), 5, &EnsembleOptions::default())
        .unwrap();
    assert!(s.max_drift <= 1e-12, "{:e}", s.max_drift);
    assert_eq!(s.escape_count, 0);
}

#[test]
fn resonant_indefinite_drifts_more_than_convex() {
    let golden = (1.0 + 5f64.sqrt()) / 2.0;
    let build = |alpha: Vec<f64>, beta: Vec<Vec<f64>>| {
        let mut p = RandomHamiltonianParams::new(2, AlphaMode::Explicit { alpha }, 21);
        p.degree_max = 3;
        p.density = 1.0;
        p.include_beta = Some(BetaSpec::Matrix(beta));
        generate_random_hamiltonian(&p).unwrap()
    };
    let convex = build(vec![1.0, golden], vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
    let resonant = build(vec![1.0, 2.0], vec![vec![1.0, 0.0], vec![0.0, -1.0]]);
    let cfg = IntegratorConfig::default();
    let opts = EnsembleOptions::default();
    let a = ensemble_drift(&convex, 0.1, 8, 200.0, &cfg, 2, &opts).unwrap();
    let b = ensemble_drift(&resonant, 0.1, 8, 200.0, &cfg, 2, &opts).unwrap();
    assert!(b.max_drift > a.max_drift);
}
