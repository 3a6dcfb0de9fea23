use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn pursuit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pursuit")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn same_files(a: &Path, b: &Path) {
    let mut names: Vec<_> = fs::read_dir(a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(!names.is_empty());
    for name in names {
        assert_eq!(
            fs::read(a.join(&name)).unwrap(),
            fs::read(b.join(&name)).unwrap(),
            "{name:?}"
        );
    }
}

#[test]
fn baselines_print_four_rows() {
    let out = pursuit(&["baselines"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    for label in ["unoptimised-1", "unoptimised-2", "iterative-1", "iterative-2"] {
        assert!(text.contains(label), "{text}");
    }
}

#[test]
fn fixed_seed_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let out = pursuit(&[
            "optimize-strategy",
            "--order",
            "ABC,CAB",
            "--reps",
            "1",
            "--inner-budget",
            "40",
            "--outer-budget",
            "3",
            "--seed",
            "9",
            "--out",
            dir.path().to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", stderr(&out));
    }
    same_files(a.path(), b.path());
    assert!(a.path().join("best_trace_CAB.csv").exists());
}

#[test]
fn simulate_accepts_strategy_and_profile() {
    let out = pursuit(&[
        "simulate",
        "--strategy",
        "1,2,2,2,2,2,2,2,2,2,2,2",
        "--profile",
        "900,364",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("207.64"), "{}", stdout(&out));

    let out = pursuit(&["simulate", "--profile", "409"]);
    assert!(stdout(&out).contains("209.46"), "{}", stdout(&out));
}

#[test]
fn config_file_overrides_apply() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("race.toml");
    fs::write(&path, "[race]\ntransition_time = 0.0\n").unwrap();
    let out = pursuit(&["simulate", "--config", path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    // 11 transitions of 0.12 s removed from 207.64 s.
    assert!(stdout(&out).contains("206.32"), "{}", stdout(&out));
}

#[test]
fn invalid_input_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "[riders.A]\nmass = -1.0\n").unwrap();
    let out = pursuit(&["baselines", "--config", bad.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("riders.A.mass"), "{}", stderr(&out));

    let out = pursuit(&["simulate", "--order", "ABD"]);
    assert!(!out.status.success());

    let out = pursuit(&["optimize-power", "--reps", "0"]);
    assert!(!out.status.success());

    let out = pursuit(&["simulate", "--strategy", "1,4"]);
    assert!(!out.status.success());

    let out = pursuit(&[
        "baselines",
        "--config",
        dir.path().join("missing.toml").to_str().unwrap(),
    ]);
    assert!(!out.status.success());

    let out = pursuit(&["frobnicate"]);
    assert!(!out.status.success());
}
