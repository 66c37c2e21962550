//! End-to-end checks of the binary: exit codes, deterministic bytes, and
//! schema-valid JSON reports.

use serde_json::Value;
use std::process::{Command, Output};

fn kdpa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kdpa")).args(args).output().expect("binary runs")
}

fn stdout_of(args: &[&str]) -> String {
    let out = kdpa(args);
    assert!(out.status.success(), "kdpa {args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).expect("utf8 output")
}

fn exit_code(args: &[&str]) -> i32 {
    kdpa(args).status.code().expect("exit code")
}

/// Checks `value` against the subset of JSON Schema used by the checked-in
/// report schema: type, enum, properties, required, additionalProperties,
/// and items.
fn validate(schema: &Value, value: &Value, path: &str, errors: &mut Vec<String>) {
    if let Some(expected) = schema.get("type").and_then(Value::as_str) {
        let ok = match expected {
            "object" => value.is_object(),
            "array" => value.is_array(),
            "string" => value.is_string(),
            "number" => value.is_number(),
            "integer" => value.is_i64() || value.is_u64(),
            "boolean" => value.is_boolean(),
            other => panic!("unsupported schema type {other:?}"),
        };
        if !ok {
            errors.push(format!("{path}: expected {expected}"));
            return;
        }
    }
    if let Some(allowed) = schema.get("enum").and_then(Value::as_array) {
        if !allowed.contains(value) {
            errors.push(format!("{path}: {value} not in enum"));
        }
    }
    if let Some(object) = value.as_object() {
        let empty = serde_json::Map::new();
        let props = schema.get("properties").and_then(Value::as_object).unwrap_or(&empty);
        for (key, child) in object {
            let child_path = format!("{path}.{key}");
            if let Some(child_schema) = props.get(key) {
                validate(child_schema, child, &child_path, errors);
            } else {
                match schema.get("additionalProperties") {
                    Some(Value::Bool(false)) => errors.push(format!("{child_path}: unexpected key")),
                    Some(extra) if extra.is_object() => validate(extra, child, &child_path, errors),
                    _ => {}
                }
            }
        }
        if let Some(required) = schema.get("required").and_then(Value::as_array) {
            for key in required.iter().filter_map(Value::as_str) {
                if !object.contains_key(key) {
                    errors.push(format!("{path}.{key}: missing required key"));
                }
            }
        }
    }
    if let Some(items) = value.as_array() {
        if let Some(item_schema) = schema.get("items") {
            for (i, item) in items.iter().enumerate() {
                validate(item_schema, item, &format!("{path}[{i}]"), errors);
            }
        }
    }
}

fn assert_valid_report(json: &str) {
    let schema: Value =
        serde_json::from_str(include_str!("../schema/run_report.schema.json")).expect("schema parses");
    let value: Value = serde_json::from_str(json).expect("report parses");
    let mut errors = Vec::new();
    validate(&schema, &value, "$", &mut errors);
    assert!(errors.is_empty(), "schema violations: {errors:?}");
}

#[test]
fn reports_validate_against_schema() {
    for args in [
        vec!["thresholds", "--dist", "uniform:0,1", "--n", "10", "--k", "5", "--objective", "welfare"],
        vec!["thresholds", "--dist", "exp:1", "--n", "10", "--k", "3", "--objective", "revenue"],
        vec!["thresholds", "--dist", "uniform:0,1", "--n", "12", "--m", "3", "--k", "2", "--objective", "prophet"],
        vec!["prices", "--dist", "uniform:0,1", "--n", "4", "--k", "2", "--objective", "revenue"],
        vec!["simulate", "--dist", "uniform:0,1", "--n", "6", "--k", "2", "--objective", "welfare", "--trials", "20000", "--seed", "3"],
        vec!["simulate", "--dist", "uniform:0,1", "--n", "8", "--m", "2", "--k", "2", "--objective", "prophet", "--trials", "20000", "--seed", "3"],
        vec!["dp", "--dist", "uniform:0,1", "--n", "10", "--k", "2", "--grid", "200"],
    ] {
        assert_valid_report(&stdout_of(&args));
    }
}

#[test]
fn json_and_csv_bytes_are_deterministic() {
    let simulate = vec![
        "simulate", "--dist", "exp:1", "--n", "10", "--k", "3", "--objective", "revenue",
        "--trials", "30000", "--seed", "7",
    ];
    assert_eq!(stdout_of(&simulate), stdout_of(&simulate));
    let trajectory = vec!["trajectory", "--dist", "uniform:0,1", "--n", "10", "--k", "5"];
    assert_eq!(stdout_of(&trajectory), stdout_of(&trajectory));
}

#[test]
fn thread_cap_does_not_change_output() {
    let base = vec![
        "simulate", "--dist", "uniform:0,1", "--n", "8", "--k", "3", "--objective", "welfare",
        "--trials", "40000", "--seed", "11",
    ];
    let mut single = base.clone();
    single.extend(["--threads", "1"]);
    let mut quad = base.clone();
    quad.extend(["--threads", "4"]);
    assert_eq!(stdout_of(&single), stdout_of(&quad));
}

#[test]
fn out_flag_writes_stdout_bytes() {
    let dir = tempfile::tempdir().expect("tempdir");
    let path = dir.path().join("report.json");
    let args = vec!["thresholds", "--dist", "uniform:0,1", "--n", "5", "--k", "2", "--objective", "welfare"];
    let expected = stdout_of(&args);
    let mut with_out: Vec<&str> = args.clone();
    let path_str = path.to_str().unwrap();
    with_out.extend(["--out", path_str]);
    let out = kdpa(&with_out);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    assert_eq!(std::fs::read_to_string(&path).unwrap(), expected);
}

#[test]
fn table_distributions_load_from_csv() {
    let dir = tempfile::tempdir().expect("tempdir");
    let path = dir.path().join("quantiles.csv");
    std::fs::write(&path, "q,v\n0,0\n0.5,1\n1,3\n").unwrap();
    let spec = format!("table:{}", path.display());
    let json = stdout_of(&["thresholds", "--dist", &spec, "--n", "6", "--k", "2", "--objective", "welfare"]);
    assert_valid_report(&json);
}

#[test]
fn exit_codes_follow_the_contract() {
    assert_eq!(exit_code(&["verify", "fast"]), 0);
    assert_eq!(exit_code(&["thresholds", "--dist", "nonsense"]), 2);
    assert_eq!(exit_code(&["thresholds", "--dist", "uniform:2,1"]), 2);
    assert_eq!(exit_code(&["simulate", "--m", "2", "--objective", "revenue"]), 2);
    assert_eq!(exit_code(&["dp", "--grid", "1"]), 2);
    assert_eq!(exit_code(&["thresholds", "--dist", "uniform:0,1", "--n", "1", "--k", "3"]), 3);
    assert_eq!(exit_code(&["simulate", "--unknown-flag"]), 2);
}

#[test]
fn logging_goes_to_stderr_only() {
    let args = ["thresholds", "--dist", "uniform:0,1", "--n", "5", "--k", "2", "--objective", "welfare"];
    let quiet = stdout_of(&args);
    let out = Command::new(env!("CARGO_BIN_EXE_kdpa"))
        .args(args)
        .env("KDPA_LOG", "debug")
        .output()
        .expect("binary runs");
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap(), quiet);
}
