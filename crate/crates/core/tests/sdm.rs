use hamlab::lab::CounterRng;
use hamlab::sdm::{
    bad_set_quadratic, check_sdm_quadratic, enumerate_gl, prevalence_estimate, symmetric_eigenvalues,
    symmetric_matrix, PrevalenceConfig, SubspaceCatalog,
};

fn random_symmetric(rng: &mut CounterRng, n: usize) -> Vec<Vec<f64>> {
    let mut b = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            let x = rng.uniform(-1.0, 1.0);
            b[i][j] = x;
            b[j][i] = x;
        }
    }
    b
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(f)
}

#[test]
fn enumeration_and_prevalence_independent_of_worker_count() {
    let keys = |threads| {
        in_pool(threads, || {
            (1..=3)
                .map(|k| enumerate_gl(3, k, 2).unwrap().iter().map(|s| s.key.to_string()).collect::<Vec<_>>())
                .collect::<Vec<_>>()
        })
    };
    assert_eq!(keys(1), keys(3));
    let report = |threads| in_pool(threads, || prevalence_estimate(2, 6.0, 0.05, 3, 500, 9, &PrevalenceConfig::default()).unwrap());
    assert_eq!(report(1), report(3));
}

#[test]
fn subspaces_are_distinct_as_projectors() {
    for n in 1..=3 {
        for k in 1..=n {
            let subs = enumerate_gl(n, k, 2).unwrap();
            let proj: Vec<_> = subs.iter().map(|s| s.projector()).collect();
            for i in 0..proj.len() {
                for j in 0..i {
                    let sep = (&proj[i] - &proj[j]).norm();
                    assert!(sep > 1e-10, "n={n} k={k}: {} and {} coincide", subs[i].key, subs[j].key);
                }
            }
        }
    }
}

#[test]
fn count_bound_for_heights_at_least_two() {
    for n in 1..=3usize {
        for l in 2..=3u32 {
            if n == 3 && l == 3 {
                continue; // covered by the catalog sizes below; slow to enumerate twice
            }
            for k in 1..=n {
                let count = enumerate_gl(n, k, l).unwrap().len() as f64;
                assert!(count <= (l as f64).powi((n * n) as i32), "n={n} k={k} L={l}: {count}");
            }
        }
    }
    // the bound L^{n²} is 1 at L = 1, but there are four rational lines in the plane of height 1
    assert_eq!(enumerate_gl(2, 1, 1).unwrap().len(), 4);
}

#[test]
fn restricted_sigma_below_largest_singular_value() {
    let cat = SubspaceCatalog::new(3, 2).unwrap();
    let mut rng = CounterRng::new(77, 0);
    for _ in 0..50 {
        let b = random_symmetric(&mut rng, 3);
        let m = symmetric_matrix(&b).unwrap();
        let sigma_max = symmetric_eigenvalues(&m).iter().fold(0.0f64, |a, x| a.max(x.abs()));
        for s in &cat.subspaces {
            let r = s.restrict(&m);
            let smin = symmetric_eigenvalues(&r).iter().fold(f64::INFINITY, |a, x| a.min(x.abs()));
            assert!(smin <= sigma_max * (1.0 + 1e-12));
        }
    }
}

#[test]
fn margin_invariant_under_signed_permutations() {
    // signed permutations map the integer lattice and its heights to themselves
    let mut rng = CounterRng::new(3, 0);
    for _ in 0..20 {
        let b = random_symmetric(&mut rng, 3);
        let perm = [2usize, 0, 1];
        let sign = [1.0, -1.0, 1.0];
        let pb: Vec<Vec<f64>> = (0..3)
            .map(|i| (0..3).map(|j| sign[i] * sign[j] * b[perm[i]][perm[j]]).collect())
            .collect();
        let a = check_sdm_quadratic(&[], &b, 0.05, 6.0, 2).unwrap();
        let c = check_sdm_quadratic(&[], &pb, 0.05, 6.0, 2).unwrap();
        assert!((a.gamma_margin - c.gamma_margin).abs() <= 1e-12 * a.gamma_margin.max(1.0));
        assert_eq!(a.passed, c.passed);
    }
}

#[test]
fn bad_set_measure_and_conclusion() {
    let mut rng = CounterRng::new(12, 0);
    for _ in 0..200 {
        let k = 1 + rng.below(4) as usize;
        let b = random_symmetric(&mut rng, k);
        let kappa = rng.uniform(1e-3, 0.5);
        let bad = bad_set_quadratic(&b, kappa).unwrap();
        assert!(bad.total_measure <= 2.0 * k as f64 * kappa * (1.0 + 1e-12));
        for w in bad.intervals.windows(2) {
            assert!(w[0].1 < w[1].0);
        }
        let m = symmetric_matrix(&b).unwrap();
        for _ in 0..20 {
            let xi = rng.uniform(-3.0, 3.0);
            if bad.contains(xi) {
                continue;
            }
            let shifted = &m - nalgebra::DMatrix::identity(k, k) * xi;
            for _ in 0..20 {
                let eta = nalgebra::DVector::from_fn(k, |_, _| rng.normal());
                assert!((&shifted * &eta).norm() > kappa * eta.norm());
            }
        }
    }
}

#[test]
fn passing_verdicts_are_monotone_in_gamma() {
    let mut rng = CounterRng::new(5, 1);
    for _ in 0..20 {
        let b = random_symmetric(&mut rng, 2);
        let v = check_sdm_quadratic(&[], &b, 0.1, 6.0, 3).unwrap();
        // the margin is the supremum of passing γ'
        if v.gamma_margin > 1e-9 && v.gamma_margin < 1.0 {
            assert!(check_sdm_quadratic(&[], &b, v.gamma_margin * 0.99, 6.0, 3).unwrap().passed);
            assert!(!check_sdm_quadratic(&[], &b, v.gamma_margin, 6.0, 3).unwrap().passed);
        }
    }
}
