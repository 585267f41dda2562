mod schema_check;

use hamlab::lab::{
    run_experiment, AlphaMode, Artifacts, ExperimentKind, ExperimentSpec, HamiltonianSource, RandomHamiltonianParams,
};
use serde_json::{json, Value};

use schema_check::{check_csv, check_json, schema_for};

fn golden(seed: u64, scale: f64) -> HamiltonianSource {
    let mut params = RandomHamiltonianParams::new(2, AlphaMode::GoldenFamily, seed);
    params.coefficient_scale = scale;
    HamiltonianSource::Generated { params }
}

fn small_spec(kind: ExperimentKind) -> ExperimentSpec {
    let mut s = ExperimentSpec::new(kind, 5);
    let k = &mut s.knobs;
    match kind {
        ExperimentKind::RemainderScaling => {
            s.hamiltonian = Some(golden(1, 0.1));
            k.rho = vec![0.1, 0.05];
            k.m_max = 4;
        }
        ExperimentKind::DriftVsRho | ExperimentKind::ConvexVsGeneric => {
            s.hamiltonian = Some(golden(2, 1.0));
            k.rho = vec![0.1, 0.05];
            k.n_traj = 3;
            k.t_max = 2.0;
            k.sample_stride = 50;
        }
        ExperimentKind::SdmPrevalence => {
            k.samples = 400;
            k.gamma_p = vec![0.1, 0.0];
        }
        ExperimentKind::BnfRoundtrip => {
            s.hamiltonian = Some(golden(3, 0.5));
            k.m_max = 3;
            k.points = 5;
        }
    }
    s
}

fn validate_all(a: &Artifacts) {
    for f in &a.files {
        match schema_for(&f.name) {
            None => assert!(f.contents.contains("plot "), "{} is not a plot script", f.name),
            Some(rel) if rel.starts_with("csv/") => {
                assert!(check_csv(&rel, &f.contents) > 0, "{} has no rows", f.name);
            }
            Some(rel) => check_json(&rel, &serde_json::from_str(&f.contents).unwrap()),
        }
    }
}

const KINDS: [ExperimentKind; 5] = [
    ExperimentKind::RemainderScaling,
    ExperimentKind::DriftVsRho,
    ExperimentKind::SdmPrevalence,
    ExperimentKind::ConvexVsGeneric,
    ExperimentKind::BnfRoundtrip,
];

#[test]
fn artifacts_validate_and_reruns_are_byte_identical() {
    for kind in KINDS {
        let spec = small_spec(kind);
        let a = run_experiment(&spec).unwrap();
        assert!(a.get(&format!("{}.summary.json", kind.name())).is_some());
        validate_all(&a);
        let b = run_experiment(&spec).unwrap();
        assert_eq!(a.files, b.files, "{kind:?} rerun differs");
    }
}

#[test]
fn artifacts_written_to_disk_match_memory() {
    let spec = small_spec(ExperimentKind::SdmPrevalence);
    let a = run_experiment(&spec).unwrap();
    let dir = tempfile::tempdir().unwrap();
    a.write_to(dir.path()).unwrap();
    for f in &a.files {
        assert_eq!(std::fs::read_to_string(dir.path().join(&f.name)).unwrap(), f.contents);
    }
}

#[test]
fn spec_round_trip_and_schema() {
    for kind in KINDS {
        let mut spec = small_spec(kind);
        spec.output = Some("out/dir".into());
        let v = serde_json::to_value(&spec).unwrap();
        check_json("experiment_spec.schema.json", &v);
        let back: ExperimentSpec = serde_json::from_value(v.clone()).unwrap();
        assert_eq!(back, spec);
        assert_eq!(serde_json::to_value(&back).unwrap(), v);
    }
    // a minimal spec fills in defaults
    let minimal: ExperimentSpec = serde_json::from_value(json!({"kind": "bnf_roundtrip"})).unwrap();
    assert_eq!(minimal.knobs.m_max, 8);
    check_json("experiment_spec.schema.json", &json!({"kind": "bnf_roundtrip"}));

    let bad = json!({"kind": "drift_vs_rho", "knobs": {"dt": 0.1}});
    assert!(serde_json::from_value::<ExperimentSpec>(bad.clone()).is_err());
    assert!(!schema_check::validator("experiment_spec.schema.json").is_valid(&bad));
}

#[test]
fn invalid_knobs_are_rejected() {
    let mut s = small_spec(ExperimentKind::DriftVsRho);
    s.knobs.rho = vec![0.05, 0.1];
    assert!(run_experiment(&s).unwrap_err().is_validation());
    let mut s = small_spec(ExperimentKind::SdmPrevalence);
    s.knobs.tau_p = 1.5;
    assert!(run_experiment(&s).unwrap_err().is_validation());
    let mut s = small_spec(ExperimentKind::BnfRoundtrip);
    s.knobs.integrator.dt = 0.0;
    assert!(run_experiment(&s).unwrap_err().is_validation());
}

fn results(a: &Artifacts) -> &Value {
    &a.summary["results"]
}

#[test]
fn zero_perturbation_is_flagged_integrable() {
    let mut s = small_spec(ExperimentKind::RemainderScaling);
    s.hamiltonian = Some(golden(1, 0.0));
    let a = run_experiment(&s).unwrap();
    let r = results(&a);
    assert_eq!(r["integrable"], true);
    assert!(r["fit"].is_null());
    validate_all(&a);
}

#[test]
fn prevalence_zero_gamma_and_series_bound_threshold() {
    let a = run_experiment(&small_spec(ExperimentKind::SdmPrevalence)).unwrap();
    let reports = results(&a)["reports"].as_array().unwrap();
    assert_eq!(reports[1]["gamma_p"], 0.0);
    assert_eq!(reports[1]["bad_fraction"], 0.0);
    assert_eq!(reports[1]["bad_count"], 0);

    // n = 2: the full series over L converges iff τ' > n² + 1 = 5
    for (tau_p, finite) in [(4.5, false), (5.0, false), (5.5, true), (8.0, true)] {
        let mut s = small_spec(ExperimentKind::SdmPrevalence);
        s.knobs.tau_p = tau_p;
        s.knobs.samples = 100;
        s.knobs.gamma_p = vec![0.05];
        let a = run_experiment(&s).unwrap();
        let series = &results(&a)["reports"][0]["paper_series_bound"];
        assert_eq!(series.is_number(), finite, "tau' = {tau_p}: {series}");
        let csv = a.get("sdm_prevalence.csv").unwrap();
        assert_eq!(csv.lines().nth(1).unwrap().split(',').nth(7).unwrap() == "inf", !finite);
    }
}

#[test]
fn convex_vs_generic_rows() {
    let a = run_experiment(&small_spec(ExperimentKind::ConvexVsGeneric)).unwrap();
    let rows = results(&a)["rows"].as_array().unwrap();
    let by = |c: &str| rows.iter().find(|r| r["config"] == c).unwrap();
    let convex = by("sign_definite");
    assert_eq!(convex["sdm_passed"], true);
    assert!((convex["sdm_margin"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(by("indefinite_sdm_pass")["sdm_passed"], true);
    assert_eq!(by("sdm_fail")["sdm_passed"], false);
    let csv = a.get("convex_vs_generic.csv").unwrap();
    let mut rdr = csv::Reader::from_reader(csv.as_bytes());
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 3);
    let fail = rows.iter().find(|r| &r[0] == "sdm_fail").unwrap();
    assert_eq!(&fail[2], "false");
    // witness at height 1 with a vanishing margin
    assert_eq!(&fail[4], "1");
    assert!(fail[3].parse::<f64>().unwrap() < 1e-12);
}

#[test]
fn remainder_scaling_robust_to_overestimated_tau() {
    let mut s = ExperimentSpec::new(ExperimentKind::RemainderScaling, 1);
    s.hamiltonian = Some(golden(1, 0.1));
    s.knobs.tau = 2.0;
    let a = run_experiment(&s).unwrap();
    let r = results(&a);
    assert_eq!(r["monotone_min_remainder"], true);
    assert!(r["fit"]["r_squared"].is_number());
}
