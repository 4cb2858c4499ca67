use std::path::Path;

use crystalwalk_cli::{run_cli, EXIT_CONFIG, EXIT_FAIL, EXIT_OK};
use serde_json::Value;

fn run(args: &[&str]) -> i32 {
    run_cli(std::iter::once("crystalwalk").chain(args.iter().copied()))
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn asymptotics_symmetric_ice_gamma() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("a.json");
    assert_eq!(run(&["asymptotics", "--config", "builtin:symmetric-ice", "--out", out.to_str().unwrap()]), EXIT_OK);
    let v = read_json(&out);
    let gamma = &v["Gamma"];
    let expected = [[0.4, 0.0, 0.0], [0.0, 0.4, 0.0], [0.0, 0.0, 0.2]];
    for r in 0..3 {
        for c in 0..3 {
            let g = gamma[r][c].as_f64().unwrap();
            assert!((g - expected[r][c]).abs() < 1e-12, "Gamma[{r}][{c}] = {g}");
        }
    }
    for key in ["mu", "theta", "zeta", "sigma2", "nu", "Lambda", "lln_limit"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
}

#[test]
fn asymptotics_graphite_lists_m_rho() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("g.json");
    assert_eq!(run(&["asymptotics", "--config", "builtin:symmetric-graphite", "--out", out.to_str().unwrap()]), EXIT_OK);
    let v = read_json(&out);
    for key in ["m", "rho", "gamma", "delta"] {
        assert!(!v[key].is_null(), "missing {key}");
    }
    assert_eq!(v["Lambda"].as_array().unwrap().len(), 5);
    assert!((v["Gamma"][2][2].as_f64().unwrap() - 1.0 / 9.0).abs() < 1e-12);
}

#[test]
fn bad_normalization_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "bad.json",
        r#"{"lattice": "ice", "p": 0.2, "horizontal": [[0.3, 0.3, 0.3], [0.2, 0.3, 0.3]]}"#,
    );
    assert_eq!(run(&["asymptotics", "--config", &cfg]), EXIT_CONFIG);
    assert_eq!(run(&["verify", "oracles", "--config", &cfg]), EXIT_CONFIG);
}

#[test]
fn unknown_key_and_usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "u.json", r#"{"lattice": "ice", "p": 0.2, "gamma": 3}"#);
    assert_eq!(run(&["asymptotics", "--config", &cfg]), EXIT_CONFIG);
    assert_eq!(run(&["asymptotics", "--config", "/nonexistent/x.json"]), EXIT_CONFIG);
    assert_eq!(run(&["verify", "bogus", "--config", "builtin:zigzag"]), EXIT_CONFIG);
    assert_eq!(run(&["verify", "oracles", "--config", "builtin:zigzag", "--tol", "cov_rel"]), EXIT_CONFIG);
    assert_eq!(run(&["verify", "oracles", "--config", "builtin:zigzag", "--tol", "cov_rel=-1"]), EXIT_CONFIG);
    assert_eq!(run(&["--version"]), EXIT_OK);
}

#[test]
fn simulate_writes_trajectory_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("t.csv");
    let js = dir.path().join("s.json");
    let code = run(&[
        "simulate",
        "--config",
        "builtin:symmetric-graphite",
        "--steps",
        "50",
        "--seed",
        "9",
        "--trajectory",
        csv.to_str().unwrap(),
        "--summary",
        js.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_OK);
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "step,x,y,z,i,j,k_sign");
    assert_eq!(lines.len(), 52);
    assert_eq!(lines[1], "0,0,0,0,1,1,1");
    // i flips every step on graphite
    for (t, line) in lines[1..].iter().enumerate() {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols.len(), 7);
        let i: i32 = cols[4].parse().unwrap();
        assert_eq!(i, if t % 2 == 0 { 1 } else { -1 });
        let (j, k): (i32, i32) = (cols[5].parse().unwrap(), cols[6].parse().unwrap());
        assert_eq!(i * j, k);
    }
    let summary = read_json(&js);
    assert_eq!(summary["steps"], 50);
    let last: Vec<f64> = lines[51].split(',').skip(1).take(3).map(|c| c.parse().unwrap()).collect();
    for q in 0..3 {
        assert!((summary["position"][q].as_f64().unwrap() - last[q]).abs() < 1e-12);
    }
}

#[test]
fn ice_trajectory_leaves_graphite_columns_empty() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("t.csv");
    let js = dir.path().join("s.json");
    let args = ["simulate", "--config", "builtin:zigzag", "--steps", "3", "--trajectory", csv.to_str().unwrap(), "--summary", js.to_str().unwrap()];
    assert_eq!(run(&args), EXIT_OK);
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text, "step,x,y,z,i,j,k_sign\n0,0,0,0,1,,\n1,1.5,0,0,-1,,\n2,0,0,0,1,,\n3,1.5,0,0,-1,,\n");
}

#[test]
fn simulate_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for p in [&a, &b] {
        assert_eq!(
            run(&["simulate", "--config", "builtin:symmetric-ice", "--steps", "1000", "--seed", "4", "--summary", p.to_str().unwrap()]),
            EXIT_OK
        );
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn verify_writes_report_schema() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let code = run(&[
        "verify",
        "ledger",
        "--config",
        "builtin:symmetric-graphite",
        "--steps",
        "2000",
        "--ledger-paths",
        "2",
        "--seed",
        "3",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_OK);
    let v = read_json(&out);
    assert!(v["meta"]["timestamp"].is_u64());
    assert_eq!(v["meta"]["seed"], 3);
    assert_eq!(v["meta"]["check"], "ledger");
    let reports = v["reports"].as_array().unwrap();
    assert!(!reports.is_empty());
    for r in reports {
        for key in ["check", "status", "observed", "target", "tolerance", "seed", "n", "replicates"] {
            assert!(r.get(key).is_some(), "{key} missing in {r}");
        }
        assert_eq!(r["status"], "pass");
    }
    assert_eq!(v["totals"]["fail"], 0);
}

#[test]
fn impossible_tolerance_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    // No finite batch matches Γ to 1e-9 relative.
    let code = run(&[
        "verify",
        "clt",
        "--config",
        "builtin:symmetric-ice",
        "--steps",
        "100",
        "--replicates",
        "2000",
        "--tol",
        "cov_rel=1e-9",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_FAIL);
    assert!(read_json(&out)["totals"]["fail"].as_u64().unwrap() > 0);
}

#[test]
fn verify_all_zigzag_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("z.json");
    let code = run(&[
        "verify",
        "all",
        "--config",
        "builtin:zigzag",
        "--steps",
        "101",
        "--replicates",
        "1000",
        "--lln-steps",
        "100001",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_OK);
}

#[test]
fn selftest_passes() {
    assert_eq!(run(&["selftest"]), EXIT_OK);
}
