use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn ncot(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ncot"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn scratch(name: &str, body: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("ncot-cli-{}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "bad json ({e}): {}\nstderr: {}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn solve_mk_reports_value_and_plan() {
    let a = scratch(
        "a.json",
        r#"{"dim":1,"atoms":[{"x":[0.0],"w":0.5},{"x":[3.0],"w":0.5}]}"#,
    );
    let b = scratch(
        "b.json",
        r#"{"dim":1,"atoms":[{"x":[1.0],"w":0.5},{"x":[2.0],"w":0.5}]}"#,
    );
    let out = ncot(&[
        "solve-mk",
        "--p0",
        s(&a),
        "--p1",
        s(&b),
        "--cost",
        "power:0.5",
    ]);
    assert!(out.status.success());
    let v = json(&out);
    assert!((v["value"].as_f64().unwrap() - 1.0).abs() < 1e-12);

    let out = ncot(&[
        "solve-mk",
        "--p0",
        s(&a),
        "--p1",
        s(&b),
        "--cost",
        "power:0.5",
        "--brute-force",
    ]);
    assert!((json(&out)["value"].as_f64().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn eval_and_build_optimal() {
    let path = scratch(
        "path.json",
        r#"{"start":[0.0],"pieces":[{"dt":0.5,"v":[2.0]},{"dt":0.5,"v":[0.0]}]}"#,
    );
    let out = ncot(&[
        "eval",
        "--objective",
        "plain",
        "--path",
        s(&path),
        "--bound",
        "2",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!((json(&out)["value"].as_f64().unwrap() - 0.5 * 2f64.sqrt()).abs() < 1e-15);
    let out = ncot(&["eval", "--objective", "L1", "--path", s(&path)]);
    assert_eq!(json(&out)["value"].as_f64().unwrap(), 1.0);
    let out = ncot(&[
        "eval",
        "--objective",
        "TV",
        "--path",
        s(&path),
        "--bound",
        "2",
    ]);
    assert!((json(&out)["value"].as_f64().unwrap() - 0.5 * 2f64.sqrt()).abs() < 1e-15);

    let a = scratch("o.json", r#"{"dim":2,"atoms":[{"x":[0.0,0.0],"w":1.0}]}"#);
    let b = scratch("t.json", r#"{"dim":2,"atoms":[{"x":[2.0,0.0],"w":1.0}]}"#);
    let out = ncot(&[
        "build-optimal",
        "--theorem",
        "2.6",
        "--p0",
        s(&a),
        "--p1",
        s(&b),
        "--bound",
        "4",
    ]);
    let v = json(&out);
    assert!((v["value"].as_f64().unwrap() - 1.0).abs() < 1e-15);
    let e = scratch("e.json", &serde_json::to_string(&v["ensemble"]).unwrap());
    let out = ncot(&["eval", "--objective", "plain", "--ensemble", s(&e)]);
    assert!((json(&out)["value"].as_f64().unwrap() - 1.0).abs() < 1e-15);

    let out = ncot(&[
        "build-optimal",
        "--theorem",
        "2.1",
        "--p0",
        s(&a),
        "--p1",
        s(&b),
        "--set",
        "prefix:0.3",
    ]);
    let v = json(&out);
    assert!((v["value"].as_f64().unwrap() - 2f64.sqrt()).abs() < 1e-12);
}

#[test]
fn oracle_subcommand() {
    let out = ncot(&[
        "oracle",
        "--x",
        "0",
        "--y",
        "1",
        "--objective",
        "plain",
        "--cap",
        "2",
    ]);
    assert!(out.status.success());
    assert!((json(&out)["value"].as_f64().unwrap() - 2f64.sqrt() / 2.0).abs() < 1e-15);
    let out = ncot(&["oracle", "--x", "0", "--y", "1", "--k", "12"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn dual_subcommand() {
    let p0 = scratch(
        "p0.json",
        r#"{"dim":1,"atoms":[{"x":[0.0],"w":0.5},{"x":[2.0],"w":0.5}]}"#,
    );
    let grid = scratch("grid.json", "[[1.0]]");
    let f = scratch("f.json", "[0.0]");
    let out = ncot(&["dual", "--f", s(&f), "--grid", s(&grid), "--p0", s(&p0)]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v = json(&out);
    assert_eq!(v["lhs"].as_f64(), Some(1.0));
    assert_eq!(v["rhs"].as_f64(), Some(1.0));
    assert_eq!(v["margin"].as_f64(), Some(0.0));
    assert!(v["header"].as_str().unwrap().contains("atomic"));
}

#[test]
fn verify_exit_codes_and_determinism() {
    let args = [
        "verify",
        "--theorem",
        "thm2_1",
        "--cost",
        "power:0.5",
        "--trials",
        "5",
        "--n-atoms",
        "4",
        "--dim",
        "2",
        "--seed",
        "7",
    ];
    let a = ncot(&args);
    assert_eq!(
        a.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&a.stderr)
    );
    let b = ncot(&args);
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(json(&a)["summary"]["passed"].as_u64(), Some(5));

    let refused = ncot(&["verify", "--theorem", "thm2_1", "--cost", "square"]);
    assert_eq!(refused.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&refused.stderr).contains("A1i"));

    let cfg = scratch(
        "cfg.json",
        r#"{"theorem":"prop2_3","seed":1,"trials":2,"cost":{"name":"remark_iii"}}"#,
    );
    let out = ncot(&["verify", "--config", s(&cfg)]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn plot_subcommand() {
    let out = ncot(&["plot", "--kind", "eq1_6", "--cost", "power:0.5"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows.len(), 33);
    assert_eq!(rows[0], "n,cost_plain");
    for (n, row) in rows[1..].iter().enumerate() {
        let v: f64 = row.split(',').nth(1).unwrap().parse().unwrap();
        assert!((v - ((n + 1) as f64).powf(-0.5)).abs() < 1e-15);
    }

    let report = scratch("report.json", "");
    let out = ncot(&[
        "verify",
        "--theorem",
        "cor2_8",
        "--trials",
        "2",
        "--out",
        s(&report),
    ]);
    assert!(out.status.success());
    let out = ncot(&["plot", "--kind", "cor2_8", "--report", s(&report)]);
    assert!(String::from_utf8(out.stdout)
        .unwrap()
        .starts_with("r,value"));
    let out = ncot(&["plot", "--kind", "nope", "--report", s(&report)]);
    assert_eq!(out.status.code(), Some(2));
}
