use std::path::Path;
use std::process::{Command, Output};

fn hgdlab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hgdlab"))
        .args(args)
        .env("HGDLAB_OUT", dir)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn help_and_bad_usage_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&hgdlab(dir.path(), &["--help"])), 0);
    assert_eq!(code(&hgdlab(dir.path(), &["frobnicate"])), 1);
    assert_eq!(code(&hgdlab(dir.path(), &["gen", "--family", "gaussian", "--d", "3"])), 1);
    assert_eq!(code(&hgdlab(dir.path(), &["bounds", "--theorem", "no_such_theorem", "--opt", "0.1"])), 1);
    let o = hgdlab(dir.path(), &["train", "--data", "missing.csv"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("error"));
}

#[test]
fn gen_train_eval_softmargin_plot_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let o = hgdlab(
        p,
        &[
            "gen",
            "--family",
            "hard-margin-sphere",
            "--d",
            "4",
            "--gamma-star",
            "0.2",
            "--noise",
            "rcn:0.1",
            "--n",
            "400",
            "--seed",
            "7",
            "--out",
            "data.csv",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(p.join("data.csv").exists() && p.join("data.meta.json").exists());

    let o =
        hgdlab(p, &["train", "--data", "data.csv", "--iterations", "200", "--checkpoints", "10", "--out", "trace.csv"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let trace = std::fs::read_to_string(p.join("trace.csv")).unwrap();
    assert!(trace.starts_with("t,emp_risk,dist_to_ref,norm_w"));
    assert!(p.join("trace.summary.json").exists());

    let o = hgdlab(p, &["eval", "--data", "data.csv", "--weights", "trace.summary.json"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(report["zero_one"].as_f64().unwrap() < 0.5, "{report}");

    let o = hgdlab(p, &["softmargin", "--data", "data.csv", "--gammas", "0.1,0.3", "--out", "sm.csv"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));

    let o = hgdlab(p, &["plot", "--csv", "trace.csv", "--x", "t", "--y", "emp_risk", "--out", "trace.svg"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(std::fs::read_to_string(p.join("trace.svg")).unwrap().starts_with("<svg"));
    assert_eq!(code(&hgdlab(p, &["plot", "--csv", "trace.csv", "--x", "t", "--y", "nope"])), 1);
}

#[test]
fn bounds_prints_reports_and_names_missing_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let o = hgdlab(
        dir.path(),
        &[
            "bounds",
            "--theorem",
            "cor_hard_margin",
            "--opt",
            "0.001",
            "--gamma-star",
            "0.5",
            "--b-x",
            "1",
            "--eps",
            "0.01",
        ],
    );
    assert_eq!(code(&o), 0);
    let r: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((r["predicted_error"].as_f64().unwrap() - 0.0414).abs() < 5e-4, "{r}");

    let o = hgdlab(dir.path(), &["bounds", "--theorem", "thm_bounded", "--opt", "0.01"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("gamma"));
}

#[test]
fn invariants_pass_and_detect_the_injected_fault() {
    let dir = tempfile::tempdir().unwrap();
    let ok = hgdlab(dir.path(), &["invariants", "--seed", "11"]);
    assert_eq!(code(&ok), 0, "{}", stdout(&ok));
    let bad = hgdlab(dir.path(), &["invariants", "--seed", "11", "--inject-fault", "flip-gradient-sign"]);
    assert_eq!(code(&bad), 2);
    assert!(stdout(&bad).lines().any(|l| l.trim_start().starts_with("FAIL gd_descent")), "{}", stdout(&bad));
}

const SMALL_SWEEP: &[&str] = &[
    "experiment",
    "hard_margin_scaling",
    "--repeats",
    "2",
    "--opt-grid",
    "0.05,0.1,0.2",
    "--eps",
    "0.2",
    "--n-test",
    "2000",
];

#[test]
fn experiments_are_byte_deterministic_per_seed() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let c = tempfile::tempdir().unwrap();
    for (dir, seed) in [(&a, "5"), (&b, "5"), (&c, "6")] {
        let mut args = SMALL_SWEEP.to_vec();
        args.extend(["--base-seed", seed]);
        let o = hgdlab(dir.path(), &args);
        assert!(matches!(code(&o), 0 | 2), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let read = |d: &tempfile::TempDir| std::fs::read(d.path().join("hard_margin_scaling.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_ne!(read(&a), read(&c));
    let summary = std::fs::read_to_string(a.path().join("hard_margin_scaling.summary.json")).unwrap();
    assert!(summary.contains("measured_err_vs_opt"));
}
