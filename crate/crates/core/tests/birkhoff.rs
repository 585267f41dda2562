mod common;

use common::{geometric_tail, oracle_normal_form};
use hamlab::birkhoff::{
    birkhoff_normal_form, normal_form_family, remainder_curve, BirkhoffConfig, Direction,
};
use hamlab::diophantine::estimate_gamma;
use hamlab::lab::{
    generate_random_hamiltonian, generate_random_hamiltonian_exact, AlphaMode, CounterRng,
    ExactGrid, RandomHamiltonianParams,
};
use hamlab::model::{EllipticHamiltonian, DEFAULT_S};
use hamlab::poly::{to_action_form, Polynomial};
use hamlab::scalar::Rational;

fn small_generic(seed: u64, scale: f64) -> EllipticHamiltonian {
    let mut p = RandomHamiltonianParams::new(2, AlphaMode::GoldenFamily, seed);
    p.coefficient_scale = scale;
    generate_random_hamiltonian(&p).unwrap()
}

fn exact_random(seed: u64, degree_min: u32) -> EllipticHamiltonian<Rational> {
    let mut p = RandomHamiltonianParams::new(2, AlphaMode::GoldenFamily, seed);
    p.coefficient_scale = 0.05;
    p.degree_min = degree_min;
    generate_random_hamiltonian_exact(&p, ExactGrid::default()).unwrap()
}

fn ball_point(rng: &mut CounterRng, dim: usize, radius: f64) -> Vec<f64> {
    loop {
        let z: Vec<f64> = (0..dim).map(|_| rng.uniform(-radius, radius)).collect();
        if z.iter().map(|x| x * x).sum::<f64>().sqrt() <= radius {
            return z;
        }
    }
}

#[test]
fn conjugacy_up_to_the_tail() {
    let h = small_generic(3, 0.002);
    let res = birkhoff_normal_form(&h, 3, None, &BirkhoffConfig::default()).unwrap();
    assert!(res.tail_bound.is_finite());
    let ev = h.evaluator();
    let mut rng = CounterRng::new(1, 0);
    let mut worst = 0.0_f64;
    for _ in 0..100 {
        let z = ball_point(&mut rng, 4, DEFAULT_S / 4.0);
        let w = res.apply_transform(&z, Direction::Forward).unwrap();
        worst = worst.max((ev.value(&w) - res.normal_form_value(&z)).abs());
    }
    assert!(
        worst <= 10.0 * res.tail_bound,
        "conjugacy defect {worst:e} vs tail {:e}",
        res.tail_bound
    );
}

#[test]
fn forward_then_inverse_is_identity() {
    let h = small_generic(5, 0.01);
    let res = birkhoff_normal_form(&h, 3, None, &BirkhoffConfig::default()).unwrap();
    let mut rng = CounterRng::new(2, 0);
    for _ in 0..20 {
        let z = ball_point(&mut rng, 4, DEFAULT_S / 2.0 * 0.9);
        let w = res.apply_transform(&z, Direction::Forward).unwrap();
        let back = res.apply_transform(&w, Direction::Inverse).unwrap();
        let err = z.iter().zip(&back).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err <= 1e-9, "round trip error {err:e}");
    }
}

#[test]
fn transform_is_symplectic() {
    let h = small_generic(7, 0.01);
    let res = birkhoff_normal_form(&h, 3, None, &BirkhoffConfig::default()).unwrap();
    let mut rng = CounterRng::new(3, 0);
    let dim = 4;
    let eps = 1e-5;
    for _ in 0..20 {
        let z = ball_point(&mut rng, dim, 1.5);
        let mut jac = vec![vec![0.0; dim]; dim];
        for j in 0..dim {
            let mut zp = z.clone();
            let mut zm = z.clone();
            zp[j] += eps;
            zm[j] -= eps;
            let fp = res.apply_transform(&zp, Direction::Forward).unwrap();
            let fm = res.apply_transform(&zm, Direction::Forward).unwrap();
            for i in 0..dim {
                jac[i][j] = (fp[i] - fm[i]) / (2.0 * eps);
            }
        }
        // JᵀΩJ − Ω with Ω = [[0, I], [−I, 0]]
        let n = dim / 2;
        let omega = |a: usize, b: usize| -> f64 {
            if b == a + n {
                1.0
            } else if a == b + n {
                -1.0
            } else {
                0.0
            }
        };
        let mut worst = 0.0_f64;
        for a in 0..dim {
            for b in 0..dim {
                let mut s = 0.0;
                for i in 0..dim {
                    for k in 0..dim {
                        s += jac[i][a] * omega(i, k) * jac[k][b];
                    }
                }
                worst = worst.max((s - omega(a, b)).abs());
            }
        }
        assert!(worst <= 1e-6, "symplectic defect {worst:e}");
    }
}

#[test]
fn zero_generators_leave_points_fixed() {
    let h = EllipticHamiltonian::new(vec![1.0, 2.0_f64.sqrt()], Polynomial::zero(2), DEFAULT_S).unwrap();
    let res = birkhoff_normal_form(&h, 3, None, &BirkhoffConfig::default()).unwrap();
    let z = [0.3, -0.2, 0.1, 0.4];
    assert_eq!(res.apply_transform(&z, Direction::Forward).unwrap(), z.to_vec());
}

#[test]
fn family_matches_direct_runs_exactly() {
    let h = exact_random(21, 3);
    let cfg = BirkhoffConfig::default();
    let family = normal_form_family(&h, 2, 3, &cfg).unwrap();
    for res in &family {
        let direct = birkhoff_normal_form(&h, res.m, None, &cfg).unwrap();
        assert_eq!(res.h_m, direct.h_m);
        assert_eq!(res.remainder, direct.remainder);
        assert_eq!(res.generators, direct.generators);
        assert_eq!(res.smallest_divisor, direct.smallest_divisor);
    }
}

#[test]
fn invariants_do_not_depend_on_working_degree() {
    let h = exact_random(22, 4);
    let cfg = BirkhoffConfig::default();
    let a = birkhoff_normal_form(&h, 3, Some(7), &cfg).unwrap();
    let b = birkhoff_normal_form(&h, 3, Some(10), &cfg).unwrap();
    assert_eq!(a.h_m, b.h_m);
    assert_eq!(a.generators, b.generators);
}

#[test]
fn lower_orders_are_prefixes() {
    let h = exact_random(23, 4);
    let cfg = BirkhoffConfig::default();
    let h4 = birkhoff_normal_form(&h, 3, None, &cfg).unwrap().h_m;
    for m in 2..3 {
        let hm = birkhoff_normal_form(&h, m, None, &cfg).unwrap().h_m;
        assert_eq!(h4.truncate(m), hm, "prefix mismatch at m = {m}");
    }
}

#[test]
fn expanded_invariants_are_rotation_invariant() {
    let h = small_generic(9, 0.05);
    let res = birkhoff_normal_form(&h, 4, None, &BirkhoffConfig::default()).unwrap();
    let poly = res.h_m.expand();
    let mut rng = CounterRng::new(4, 0);
    for _ in 0..50 {
        let z = ball_point(&mut rng, 4, 1.0);
        let base = poly.eval_f64(&z);
        for plane in 0..2 {
            let t = rng.uniform(0.0, std::f64::consts::TAU);
            let mut w = z.clone();
            let (q, p) = (z[plane], z[plane + 2]);
            w[plane] = t.cos() * q - t.sin() * p;
            w[plane + 2] = t.sin() * q + t.cos() * p;
            assert!((poly.eval_f64(&w) - base).abs() <= 1e-12);
        }
    }
}

#[test]
fn matches_real_coordinate_oracle() {
    let h = exact_random(24, 3);
    let m = 2;
    let d_work = 2 * m + 4;
    let res = birkhoff_normal_form(&h, m, None, &BirkhoffConfig::default()).unwrap();
    let oracle = oracle_normal_form(&h, m, d_work);
    let normal = oracle.transformed.truncate_by_degree(0, 2 * m);
    assert_eq!(to_action_form(&normal).unwrap(), res.h_m);
    let rem = oracle.transformed.truncate_by_degree(2 * m + 1, d_work);
    assert_eq!(rem, res.remainder);
    for (g, r) in oracle.generators.iter().zip(&res.real_generators) {
        assert_eq!(g, r);
    }

    // m = 2 entry of the remainder curve from the oracle's own polynomial
    let hf = h.to_f64();
    let r = 1.0;
    let curve = remainder_curve(&hf, 3, r, &BirkhoffConfig::default()).unwrap();
    let remf = rem.to_f64();
    let tail_part = oracle.transformed.truncate_by_degree(3, d_work).to_f64();
    let weights: Vec<(u32, f64)> = (3..=d_work)
        .map(|d| (d, tail_part.homogeneous_part(d).majorant_norm(1.0)))
        .collect();
    let expected = remf.majorant_norm(r) + geometric_tail(&weights, r);
    assert!(expected.is_finite());
    let got = curve.points[0].remainder_majorant;
    assert_eq!(curve.points[0].m, 2);
    assert!((got - expected).abs() <= 1e-9 * expected, "{got} vs {expected}");
}

#[test]
fn smallest_divisor_respects_diophantine_estimate() {
    let h = small_generic(10, 0.01);
    let tau = 1.0;
    for m in 2..=4u32 {
        let res = birkhoff_normal_form(&h, m, None, &BirkhoffConfig::default()).unwrap();
        let k = u64::from(4 * m);
        let est = estimate_gamma(&h.alpha_f64(), tau, k).unwrap();
        let lower = est.gamma_hat * (k as f64).powf(-tau);
        assert!(res.smallest_divisor.unwrap() >= lower * (1.0 - 1e-12));
    }
}

#[test]
fn doubling_rho_raises_the_best_remainder() {
    let h = small_generic(11, 0.01);
    let cfg = BirkhoffConfig::default();
    let small = remainder_curve(&h, 5, 3.0, &cfg).unwrap();
    let big = remainder_curve(&h.scaled(&2.0, -2).unwrap(), 5, 3.0, &cfg).unwrap();
    assert!(big.best_remainder > small.best_remainder);
}
