use std::path::Path;
use std::process::{Command, Output};

fn qsthermo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qsthermo")).args(args).output().expect("spawn qsthermo")
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

fn report(dir: &Path) -> serde_json::Value {
    serde_json::from_slice(&std::fs::read(dir.join("report.json")).unwrap()).unwrap()
}

#[test]
fn lists_every_scenario() {
    let out = qsthermo(&["list"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["fig1a", "fig3", "tls-populations", "oracle-convergence"] {
        assert!(text.lines().any(|l| l.starts_with(name)), "{name} missing from\n{text}");
    }
}

#[test]
fn fig1a_passes_and_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = qsthermo(&["run", "--scenario", "fig1a", "--check", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(dir.path());
    assert_eq!(r["pass"], true);
    let s = &r["scenarios"][0];
    assert_eq!(s["scenario"], "fig1a");
    for f in s["files"].as_array().unwrap() {
        assert!(dir.path().join(f.as_str().unwrap()).exists());
    }
    let csv = std::fs::read_to_string(dir.path().join("fig1a.csv")).unwrap();
    assert!(csv.starts_with("u,eps_s,V,Wext_cum,OmegaS_cum,dOmegaR_cum,sum_rule_residual\n"));
}

#[test]
fn output_is_identical_across_thread_counts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let run = |dir: &Path, threads: &str| {
        let out = qsthermo(&[
            "run",
            "--scenario",
            "fig1b",
            "--scenario",
            "fig3",
            "--scenario",
            "selfenergy",
            "--threads",
            threads,
            "--out",
            dir.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    };
    run(a.path(), "1");
    run(b.path(), "3");
    let (fa, fb) = (read_dir_sorted(a.path()), read_dir_sorted(b.path()));
    assert_eq!(fa.len(), fb.len());
    for ((na, ca), (nb, cb)) in fa.iter().zip(&fb) {
        assert_eq!(na, nb);
        assert!(ca == cb, "{na} differs between runs");
    }
}

#[test]
fn failed_check_sets_exit_status() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tp.json");
    std::fs::write(&cfg, r#"{ "scenario": "tls-populations", "name": "tp", "grid": { "eps2": [-0.5, -0.4] } }"#)
        .unwrap();
    let out_dir = dir.path().join("out");
    let args = ["run", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()];
    let plain = qsthermo(&args);
    assert!(plain.status.success(), "{}", String::from_utf8_lossy(&plain.stderr));
    assert_eq!(report(&out_dir)["pass"], false);

    let mut with_check = args.to_vec();
    with_check.push("--check");
    let checked = qsthermo(&with_check);
    assert_eq!(checked.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&checked.stderr).contains("turnstile"));
}

#[test]
fn unknown_field_reports_its_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, "{\n  \"scenario\": \"fig1a\",\n  \"temprature\": 0.1\n}\n").unwrap();
    let out = qsthermo(&["run", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("temprature") && err.contains("line 3"), "{err}");
}

#[test]
fn unknown_scenario_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = qsthermo(&["run", "--scenario", "fig9", "--out", dir.path().to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("fig9"));
    assert!(!qsthermo(&["config", "nope"]).status.success());
}

#[test]
fn printed_defaults_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let printed = qsthermo(&["config", "fig2b"]);
    assert!(printed.status.success());
    let cfg = dir.path().join("fig2b.json");
    std::fs::write(&cfg, &printed.stdout).unwrap();

    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(qsthermo(&["run", cfg.to_str().unwrap(), "--out", a.to_str().unwrap()]).status.success());
    assert!(qsthermo(&["run", "--scenario", "fig2b", "--out", b.to_str().unwrap()]).status.success());
    assert_eq!(read_dir_sorted(&a), read_dir_sorted(&b));
}

#[test]
fn shipped_configs_match_builtins() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let listed = String::from_utf8(qsthermo(&["list"]).stdout).unwrap();
    for name in listed.lines().filter_map(|l| l.split_whitespace().next()) {
        let shipped = std::fs::read(dir.join(format!("{name}.json"))).unwrap();
        assert_eq!(shipped, qsthermo(&["config", name]).stdout, "configs/{name}.json is stale");
    }
}
