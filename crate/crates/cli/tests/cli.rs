use std::path::Path;
use std::process::{Command, Output};

fn coxrs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_coxrs"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn golden(name: &str) -> String {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(name);
    std::fs::read_to_string(path)
        .unwrap()
        .trim_end()
        .to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn field(csv: &str, name: &str) -> f64 {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    let i = header.iter().position(|h| *h == name).unwrap();
    row[i].parse().unwrap()
}

#[test]
fn solve_prints_unbiased_row() {
    let o = coxrs(&[
        "solve",
        "--zeta",
        "0.110",
        "--eta",
        "0.165",
        "--S",
        "1",
        "--spectrum",
        "identity",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert_eq!(out.lines().next().unwrap(), golden("rs_header.csv"));
    assert!((field(&out, "kappa") - 1.0).abs() < 0.02);
}

#[test]
fn invalid_zeta_exits_one_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("solve.csv");
    let o = coxrs(&[
        "solve",
        "--zeta",
        "-1",
        "--eta",
        "0.1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!out.exists());
    assert!(!dir.path().join("solve.json").exists());
}

#[test]
fn usage_errors_exit_one() {
    for args in [
        &["solve", "--zeta", "0.5", "--bogus", "1"][..],
        &["solve", "--zeta", "0.5", "--spectrum", "banded:2"],
        &[
            "solve",
            "--zeta",
            "0.5",
            "--config",
            "/nonexistent/run.json",
        ],
        &["frobnicate"],
        &["simulate", "--p", "10", "--N", "20"],
    ] {
        let o = coxrs(args);
        assert_eq!(o.status.code(), Some(1), "{args:?}");
        assert!(!o.stderr.is_empty());
    }
}

#[test]
fn ml_beyond_transition_exits_two() {
    let o = coxrs(&["solve", "--zeta", "1.5", "--eta", "0"]);
    assert_eq!(
        o.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
}

#[test]
fn sweep_and_calibrate_headers_are_pinned() {
    let dir = tempfile::tempdir().unwrap();
    let sweep = dir.path().join("sweep.csv");
    let o = coxrs(&[
        "sweep",
        "--zeta-grid",
        "0.2:0.6:0.2",
        "--eta",
        "0.05",
        "--out",
        sweep.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&sweep).unwrap();
    assert_eq!(text.lines().next().unwrap(), golden("rs_header.csv"));
    assert_eq!(text.lines().count(), 4);
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("sweep.json")).unwrap())
            .unwrap();
    assert_eq!(meta["command"], "sweep");
    assert_eq!(meta["config"]["eta"], 0.05);

    let o = coxrs(&["calibrate", "--zeta", "1.055"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert_eq!(
        out.lines().next().unwrap(),
        golden("calibration_header.csv")
    );
    let eta = field(&out, "eta_star");
    assert!((field(&out, "lambda") - 2.0 * eta * 1.055).abs() < 1e-12);
}

#[test]
fn compare_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.json");
    std::fs::write(&config, r#"{"p": 40, "replicates": 3, "eta": 0.1}"#).unwrap();
    let run = |name: &str, jobs: &str| {
        let out = dir.path().join(name);
        let o = coxrs(&[
            "compare",
            "--config",
            config.to_str().unwrap(),
            "--zeta",
            "0.5",
            "--seed",
            "42",
            "--jobs",
            jobs,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        (
            std::fs::read(&out).unwrap(),
            std::fs::read(out.with_extension("json")).unwrap(),
        )
    };
    let a = run("a.csv", "2");
    let b = run("b.csv", "1");
    assert_eq!(a.0, b.0);
    // Sidecars differ only in the recorded output path and thread count.
    let strip = |bytes: &[u8]| {
        let mut v: serde_json::Value = serde_json::from_slice(bytes).unwrap();
        let cfg = v["config"].as_object_mut().unwrap();
        cfg.remove("out");
        cfg.remove("jobs");
        v
    };
    assert_eq!(strip(&a.1), strip(&b.1));
    let text = String::from_utf8(a.0).unwrap();
    assert_eq!(text.lines().next().unwrap(), golden("compare_header.csv"));
    let meta: serde_json::Value = serde_json::from_slice(&a.1).unwrap();
    assert_eq!(meta["seed"], 42);
    assert_eq!(meta["config"]["p"], 40);
}

#[test]
fn simulate_writes_cohort_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cohort.csv");
    let o = coxrs(&[
        "simulate",
        "--p",
        "5",
        "--N",
        "12",
        "--seed",
        "3",
        "--covariates",
        "t:5",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().next().unwrap(), "time,z1,z2,z3,z4,z5");
    assert_eq!(text.lines().count(), 13);
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.with_extension("json")).unwrap())
            .unwrap();
    assert_eq!(meta["result"]["beta0"].as_array().unwrap().len(), 5);
    assert_eq!(meta["seed"], 3);
}

#[test]
fn selfcheck_passes() {
    let o = coxrs(&["selfcheck"]);
    assert!(o.status.success(), "{}", stdout(&o));
    let out = stdout(&o);
    assert_eq!(out.lines().count(), 4);
    assert!(out.lines().all(|l| l.starts_with("[PASS]")));
}
