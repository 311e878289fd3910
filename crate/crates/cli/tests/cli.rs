use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_curved-nbody"))
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn column(csv: &str, name: &str) -> Vec<f64> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let k = header.iter().position(|h| *h == name).unwrap();
    lines.map(|l| l.split(',').nth(k).unwrap().parse().unwrap()).collect()
}

#[test]
fn verify_is_deterministic() {
    let a = run(&["verify", "--suite", "symmetry", "--seed", "11"]);
    let b = run(&["verify", "--suite", "symmetry", "--seed", "11"]);
    assert_eq!(a.status.code(), Some(0), "{}", stdout(&a));
    assert_eq!(a.stdout, b.stdout);
    assert!(stdout(&a).contains("Jacobi identity"));
}

#[test]
fn verify_all_writes_a_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = run(&["verify", "--suite", "all", "--seed", "5", "--out", out]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    for suite in ["geometry", "symmetry", "hamiltonian", "dynamics"] {
        assert!(stdout(&o).contains(&format!("suite {suite}")));
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "verify");
    assert_eq!(manifest["seed"], 5);
    assert_eq!(manifest["overrides"]["suite"], "all");
    assert!(dir.path().join("verify.json").exists());
}

#[test]
fn lagrange_branches_for_both_signs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let s = scenario("lagrange.json");
    let o = run(&["continue", "--scenario", s.to_str().unwrap(), "--kind", "re", "--sigma", "both", "--out", out]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("sigma=+1: reached epsilon=0.2"));
    assert!(stdout(&o).contains("sigma=-1: reached epsilon=0.2"));
    for tag in ["sigma+1", "sigma-1"] {
        let csv = fs::read_to_string(dir.path().join(format!("branch_re_{tag}.csv"))).unwrap();
        let eps = column(&csv, "epsilon");
        assert_eq!(eps.len(), 21);
        assert!((eps[20] - 0.2).abs() < 1e-12);
        assert!(column(&csv, "residual").iter().all(|r| *r <= 1e-10));
        let json: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join(format!("branch_re_{tag}.json"))).unwrap())
                .unwrap();
        assert_eq!(json["entries"].as_array().unwrap().len(), 21);
        assert!(json["failure"].is_null());
    }
    let manifest = fs::read_to_string(dir.path().join("manifest.json")).unwrap();
    assert!(manifest.contains("\"command\": \"continue\""));
}

#[test]
fn reruns_reproduce_the_outputs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let s = scenario("square.json");
    for d in [&a, &b] {
        let o = run(&[
            "continue",
            "--scenario",
            s.to_str().unwrap(),
            "--kind",
            "re",
            "--sigma",
            "-1",
            "--eps-max",
            "0.05",
            "--out",
            d.path().to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    for f in ["branch_re_sigma-1.csv", "branch_re_sigma-1.json"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap());
    }
    let strip = |d: &tempfile::TempDir| {
        let mut v: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(d.path().join("manifest.json")).unwrap()).unwrap();
        v["timestamp"] = serde_json::Value::Null;
        v["output_directory"] = serde_json::Value::Null;
        v
    };
    assert_eq!(strip(&a), strip(&b));
}

#[test]
fn drifting_lagrange_is_not_an_re() {
    let dir = tempfile::tempdir().unwrap();
    let s = scenario("lagrange_drift.json");
    let o = run(&["continue", "--scenario", s.to_str().unwrap(), "--kind", "re", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("nonzero linear momentum"), "{}", stderr(&o));
}

#[test]
fn two_body_period_closes() {
    let dir = tempfile::tempdir().unwrap();
    let s = scenario("two_body.json");
    let o = run(&["simulate", "--scenario", s.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    let get = |k: &str| summary["summary"][k].as_f64().unwrap();
    assert!(get("closure") < 1e-6);
    assert!(get("max_energy_drift") < 1e-8);
    assert!(get("max_momentum_drift") < 1e-8);
    let csv = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    let t = column(&csv, "t");
    assert_eq!(t[0], 0.0);
    assert_eq!(*t.last().unwrap(), summary["t_final"].as_f64().unwrap());
    assert!(column(&csv, "dH").iter().all(|d| d.abs() < 1e-8));
}

#[test]
fn curved_simulation_conserves() {
    let s = scenario("lagrange.json");
    let mut drift = Vec::new();
    for step in ["0.001", "0.0005"] {
        let dir = tempfile::tempdir().unwrap();
        let o = run(&[
            "simulate",
            "--scenario",
            s.to_str().unwrap(),
            "--sigma",
            "-1",
            "--epsilon",
            "0.2",
            "--t-final",
            "1.0",
            "--step",
            step,
            "--out",
            dir.path().to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        let csv = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
        assert!(column(&csv, "dmu").iter().all(|d| d.abs() < 1e-12));
        drift.push(column(&csv, "dH").iter().fold(0.0_f64, |a, d| a.max(d.abs())));
    }
    // Bounded O(h²) energy error of the midpoint rule.
    assert!(drift[0] < 1e-6);
    let ratio = drift[0] / drift[1];
    assert!((3.5..4.5).contains(&ratio), "{drift:?}");
}

#[test]
fn input_errors_exit_with_two() {
    let o = run(&["simulate", "--scenario", "/nonexistent/scenario.json"]);
    assert_eq!(o.status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{\n  \"kind\": \"lagrange\",\n  \"masses\": [1.0, 1.0 1.0]\n}\n").unwrap();
    let o = run(&["simulate", "--scenario", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));

    fs::write(&bad, r#"{"kind": "lagrange", "masses": [1.0, -2.0, 1.0], "side": 1.0}"#).unwrap();
    let o = run(&["continue", "--scenario", bad.to_str().unwrap(), "--kind", "re"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("masses[1]"), "{}", stderr(&o));

    let o = run(&["continue", "--scenario", bad.to_str().unwrap(), "--kind", "sideways"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn figure_eight_first_step() {
    let dir = tempfile::tempdir().unwrap();
    let s = scenario("figure_eight.json");
    let o = run(&[
        "continue",
        "--scenario",
        s.to_str().unwrap(),
        "--kind",
        "po",
        "--sigma",
        "+1",
        "--eps-max",
        "0.01",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("branch_po_sigma+1.csv")).unwrap();
    assert!(column(&csv, "residual").iter().all(|r| *r < 1e-8));
    assert_eq!(column(&csv, "epsilon"), vec![0.0, 0.01]);
}
