use std::process::{Command, Output};

use serde_json::Value;

fn stokes(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stokes"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

const GL2: &str = r#"{"diagonal": [[0,0],[1,0]]}"#;
const GL3: &str = r#"{"diagonal": [[0,0],[1,0.2],[0.3,0.9]]}"#;

#[test]
fn mlog_eval_m_at_minus_one_one() {
    let out = stokes(&["mlog-eval", "--fn", "M", "--tuple", "[[-1,0],[0,1]]"]);
    assert!(out.status.success());
    let v = &json(&out)["value"];
    let pi2 = std::f64::consts::PI.powi(2);
    assert!((v[0].as_f64().unwrap() + pi2).abs() < 1e-9);
    assert!(v[1].as_f64().unwrap().abs() < 1e-9);
}

#[test]
fn tree_count() {
    let out = stokes(&["trees", "--leaves", "3", "--count"]);
    assert_eq!(String::from_utf8(out.stdout).unwrap().trim(), "3");
    let all = json(&stokes(&["trees", "--leaves", "4"]));
    assert_eq!(all["count"], 11);
}

#[test]
fn zero_element_maps_to_zero() {
    let zero = "[[[0,0],[0,0]],[[0,0],[0,0]]]";
    let v = json(&stokes(&["stokes-map", "--system", GL2, "--f", zero]));
    assert_eq!(v["kind"], "Epsilon");
    assert_eq!(v["support"], Value::Array(vec![]));
    for row in v["matrix"].as_array().unwrap() {
        for z in row.as_array().unwrap() {
            assert_eq!(z[0].as_f64(), Some(0.0));
            assert_eq!(z[1].as_f64(), Some(0.0));
        }
    }
}

#[test]
fn map_and_inverse_round_trip() {
    let f = "[[[0,0],[0.05,0.01],[0,0.02]],[[-0.03,0],[0,0],[0.01,0.01]],[[0.02,-0.01],[0.04,0],[0,0]]]";
    let eps = stokes(&["stokes-map", "--system", GL3, "--f", f]);
    assert!(eps.status.success());
    let eps = String::from_utf8(eps.stdout).unwrap();
    let back = json(&stokes(&["stokes-inverse", "--system", GL3, "--eps", &eps]));
    let want: Value = serde_json::from_str(f).unwrap();
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..2 {
                let d = back["matrix"][i][j][k].as_f64().unwrap() - want[i][j][k].as_f64().unwrap();
                assert!(d.abs() < 1e-8, "({i},{j}) off by {d}");
            }
        }
    }
}

#[test]
fn schema_errors_exit_2() {
    let out = stokes(&["mlog-eval", "--fn", "M", "--tuple", "[[1,0"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json(&out)["error"]["kind"], "SchemaError");

    let out = stokes(&["--tol", "0.5", "trees", "--leaves", "2"]);
    assert_eq!(out.status.code(), Some(2));
    let out = stokes(&["--order", "13", "trees", "--leaves", "2"]);
    assert_eq!(out.status.code(), Some(2));
    let out = stokes(&["stokes-map", "--system", r#"{"foo": 1}"#, "--f", "[[[0,0]]]"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn non_generic_exits_3() {
    let out = stokes(&["mlog-eval", "--fn", "M", "--tuple", "[[1,0],[1,1e-9]]"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(json(&out)["error"]["kind"], "NonGeneric");
}

#[test]
fn not_converged_exits_4() {
    let f = "[[[0,0],[0.5,0]],[[0.5,0],[0,0]]]";
    let out = stokes(&[
        "--order",
        "3",
        "--tol",
        "1e-12",
        "--check-convergence",
        "stokes-map",
        "--system",
        GL2,
        "--f",
        f,
    ]);
    assert_eq!(out.status.code(), Some(4));
    assert_eq!(json(&out)["error"]["kind"], "NotConverged");
}

#[test]
fn verify_checks_pass_and_are_deterministic() {
    let dir = std::env::temp_dir().join(format!("stokes-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = r#"[[[0,0],[1,0.2],[0.3,0.9]],[[0.1,-0.1],[1.2,0.5],[0.2,1.1]]]"#;
    for check in ["factor", "map-roundtrip", "multipliers", "imd"] {
        let report = dir.join(format!("{check}.json"));
        let args = [
            "verify",
            check,
            "--system",
            GL3,
            "--path",
            path,
            "--report",
            report.to_str().unwrap(),
        ];
        let a = stokes(&args);
        assert_eq!(
            a.status.code(),
            Some(0),
            "{check}: {}",
            String::from_utf8_lossy(&a.stdout)
        );
        let b = stokes(&args);
        assert_eq!(a.stdout, b.stdout, "{check} output differs between runs");
        let saved: Value = serde_json::from_slice(&std::fs::read(&report).unwrap()).unwrap();
        assert_eq!(saved["pass"], true);
        assert_eq!(saved["seed"], 42);
    }
    let csv = stokes(&["verify", "multipliers", "--system", GL3, "--csv"]);
    let text = String::from_utf8(csv.stdout).unwrap();
    assert!(text.starts_with("label,series_vs_factors\n"));
    assert_eq!(text.lines().count(), 3);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn multiplier_methods_agree() {
    let f = "[[[0,0],[0.05,0.01],[0,0.02]],[[-0.03,0],[0,0],[0.01,0.01]],[[0.02,-0.01],[0.04,0],[0,0]]]";
    let a = json(&stokes(&["multipliers", "--system", GL3, "--f", f, "--ray", "0.55"]));
    let b = json(&stokes(&[
        "multipliers",
        "--system",
        GL3,
        "--f",
        f,
        "--ray",
        "0.55",
        "--method",
        "factors",
    ]));
    for side in ["plus", "minus"] {
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..2 {
                    let d = a[side][i][j][k].as_f64().unwrap() - b[side][i][j][k].as_f64().unwrap();
                    assert!(d.abs() < 1e-8);
                }
            }
        }
    }
}

#[test]
fn imd_flow_keeps_gl2_fixed_and_writes_output() {
    let f = "[[[0,0],[0.1,0]],[[0.2,0],[0,0]]]";
    let path = "[[[0,0],[1,0]],[[0.5,0.5],[-1,0.2]]]";
    let file = std::env::temp_dir().join(format!("stokes-imd-{}.json", std::process::id()));
    let out = stokes(&[
        "imd-flow",
        "--system",
        GL2,
        "--f",
        f,
        "--path",
        path,
        "-o",
        file.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_slice(&std::fs::read(&file).unwrap()).unwrap();
    assert_eq!(v["f"]["matrix"][0][1][0].as_f64(), Some(0.1));
    assert_eq!(v["f"]["matrix"][1][0][0].as_f64(), Some(0.2));
    std::fs::remove_file(&file).unwrap();
}

#[test]
fn bad_arguments_give_an_error_object() {
    let out = stokes(&["trees", "--bogus"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json(&out)["error"]["exit_code"], 2);
}

#[test]
fn batch_evaluation_keeps_input_order() {
    let single = |t: &str| json(&stokes(&["mlog-eval", "--fn", "L", "--tuple", t]))["value"].clone();
    let a = "[[1,0],[0.5,1]]";
    let b = "[[1,0],[0.5,1],[-0.3,0.2]]";
    let batch = json(&stokes(&["mlog-eval", "--fn", "L", "--tuple", &format!("[{b},{a}]")]));
    assert_eq!(batch["values"][0], single(b));
    assert_eq!(batch["values"][1], single(a));
}
