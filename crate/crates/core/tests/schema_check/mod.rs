//! Validation of emitted files against the shipped schemas.
#![allow(dead_code)]

use std::path::{Path, PathBuf};

use jsonschema::{Resource, Validator};
use serde_json::{Map, Value};

const BASE: &str = "https://hamlab.local/schemas/";

fn schema_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("schemas")
}

fn load(rel: &str) -> Value {
    let path = schema_dir().join(rel);
    serde_json::from_str(&std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display())))
        .unwrap()
}

pub fn validator(rel: &str) -> Validator {
    jsonschema::options()
        .with_resource(
            format!("{BASE}experiment_spec.schema.json"),
            Resource::from_contents(load("experiment_spec.schema.json")).unwrap(),
        )
        .build(&load(rel))
        .unwrap_or_else(|e| panic!("schema {rel}: {e}"))
}

pub fn check_json(rel: &str, doc: &Value) {
    let v = validator(rel);
    let errors: Vec<String> = v.iter_errors(doc).map(|e| format!("{} at {}", e, e.instance_path)).collect();
    assert!(errors.is_empty(), "{rel}: {errors:#?}");
}

fn cell(s: &str) -> Value {
    match s {
        "" => Value::Null,
        "true" => Value::Bool(true),
        "false" => Value::Bool(false),
        _ => {
            if let Ok(i) = s.parse::<i64>() {
                return Value::from(i);
            }
            match s.parse::<f64>() {
                Ok(x) if x.is_finite() => Value::from(x),
                _ => Value::String(s.to_string()),
            }
        }
    }
}

/// Validates every row of `csv` and the header order against `x-columns`
/// (a trailing `*` in a listed name matches a run of columns).
pub fn check_csv(rel: &str, csv_text: &str) -> usize {
    let schema = load(rel);
    let v = validator(rel);
    let mut rdr = csv::Reader::from_reader(csv_text.as_bytes());
    let header: Vec<String> = rdr.headers().unwrap().iter().map(str::to_string).collect();
    let expected: Vec<&str> = schema["x-columns"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c.as_str().unwrap())
        .collect();
    let mut hi = 0;
    for col in &expected {
        if let Some(prefix) = col.strip_suffix('*') {
            let start = hi;
            while hi < header.len() && header[hi].starts_with(prefix) {
                hi += 1;
            }
            assert!(hi > start, "{rel}: no {col} columns in {header:?}");
        } else {
            assert_eq!(header.get(hi).map(String::as_str), Some(*col), "{rel}: header {header:?}");
            hi += 1;
        }
    }
    assert_eq!(hi, header.len(), "{rel}: extra columns in {header:?}");
    let mut n = 0;
    for rec in rdr.records() {
        let rec = rec.unwrap();
        let obj: Map<String, Value> = header.iter().cloned().zip(rec.iter().map(cell)).collect();
        let obj = Value::Object(obj);
        let errors: Vec<String> = v.iter_errors(&obj).map(|e| format!("{} at {}", e, e.instance_path)).collect();
        assert!(errors.is_empty(), "{rel} row {n}: {errors:#?}");
        n += 1;
    }
    n
}

/// Schema for an artifact name, or `None` for plot scripts.
pub fn schema_for(artifact: &str) -> Option<String> {
    if artifact.ends_with(".gp") {
        return None;
    }
    if artifact.ends_with(".summary.json") {
        return Some("summary.schema.json".into());
    }
    if artifact.ends_with(".trajectories.csv") {
        return Some("csv/trajectories.schema.json".into());
    }
    let stem = artifact.strip_suffix(".csv").unwrap_or_else(|| panic!("unexpected artifact {artifact}"));
    Some(format!("csv/{stem}.schema.json"))
}
