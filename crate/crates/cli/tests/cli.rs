use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn nashzero(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nashzero"))
        .args(args)
        .current_dir(cwd)
        .env_remove("NASHZERO_THREADS")
        .output()
        .expect("spawn nashzero")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

const SMALL: &[&str] = &["run", "--iterations", "3000", "--runs", "4", "--seed", "7"];

#[test]
fn run_writes_csv_and_meta() {
    let dir = tempfile::tempdir().unwrap();
    let out = nashzero(&[SMALL, &["--mode", "two-point", "--out", "r.csv"]].concat(), dir.path());
    assert_eq!(code(&out), 0, "{out:?}");
    let csv = fs::read_to_string(dir.path().join("r.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("run_id,t,dist_sq"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len() % 4, 0);
    assert!(rows[0].starts_with("0,1,"));
    assert!(rows.last().unwrap().starts_with("3,3000,"));

    let meta = fs::read_to_string(dir.path().join("r.csv.meta")).unwrap();
    for line in ["game = example1_wide", "mode = two-point", "iterations = 3000", "runs = 4", "seed = 7"] {
        assert!(meta.lines().any(|l| l == line), "{line} missing from\n{meta}");
    }
    assert!(meta.contains("timestamp = "));
    assert!(meta.contains("version = "));
}

#[test]
fn identical_config_gives_identical_csv() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["a.csv", "b.csv"] {
        assert_eq!(code(&nashzero(&[SMALL, &["--out", name]].concat(), dir.path())), 0);
    }
    let a = fs::read(dir.path().join("a.csv")).unwrap();
    let b = fs::read(dir.path().join("b.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn thread_count_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&nashzero(&[&["--threads", "1"], SMALL, &["--out", "a.csv"]].concat(), dir.path())), 0);
    let out = Command::new(env!("CARGO_BIN_EXE_nashzero"))
        .args([SMALL, &["--out", "b.csv"]].concat())
        .current_dir(dir.path())
        .env("NASHZERO_THREADS", "3")
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
    assert_eq!(
        fs::read(dir.path().join("a.csv")).unwrap(),
        fs::read(dir.path().join("b.csv")).unwrap()
    );
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("exp.conf"),
        "# experiment\ngame = quadratic\nmode = two-point\niterations = 500\nruns = 2\nseed = 1\noutput = f.csv\n",
    )
    .unwrap();
    let out = nashzero(&["run", "--config", "exp.conf", "--seed", "9", "--runs", "3"], dir.path());
    assert_eq!(code(&out), 0, "{out:?}");
    let meta = fs::read_to_string(dir.path().join("f.csv.meta")).unwrap();
    for line in ["game = quadratic", "seed = 9", "runs = 3", "iterations = 500"] {
        assert!(meta.lines().any(|l| l == line), "{line} missing from\n{meta}");
    }
}

#[test]
fn invalid_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["run", "--iterations", "0"][..],
        &["run", "--game", "nope", "--iterations", "10"],
        &["run", "--c", "-1", "--iterations", "10"],
        &["run", "--mode", "three-point"],
        &["run", "--mode", "two-point", "--s", "0.5", "--iterations", "10"],
        &["run", "--runs", "0", "--iterations", "10"],
        &["--threads", "0", "run", "--iterations", "10"],
        &["bogus"],
    ] {
        let out = nashzero(args, dir.path());
        assert_eq!(code(&out), 2, "{args:?}: {out:?}");
        assert!(!out.stderr.is_empty());
    }
    fs::write(dir.path().join("bad.conf"), "iterations 10\n").unwrap();
    assert_eq!(code(&nashzero(&["run", "--config", "bad.conf"], dir.path())), 2);
}

#[test]
fn io_failures_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = nashzero(&[SMALL, &["--out", "missing/dir/r.csv"]].concat(), dir.path());
    assert_eq!(code(&out), 3, "{out:?}");
    assert_eq!(code(&nashzero(&["run", "--config", "absent.conf"], dir.path())), 3);
    assert_eq!(code(&nashzero(&["rate", "--input", "absent.csv"], dir.path())), 3);
}

#[test]
fn rate_on_synthetic_inverse_t() {
    let dir = tempfile::tempdir().unwrap();
    let mut csv = String::from("run_id,t,dist_sq\n");
    for run in 0..3 {
        for k in 0..=400 {
            let t = (10f64.powf(k as f64 / 100.0)).round() as u64;
            csv.push_str(&format!("{run},{t},{:e}\n", 1.0 / t as f64));
        }
    }
    fs::write(dir.path().join("s.csv"), csv).unwrap();
    let out = nashzero(&["rate", "--input", "s.csv"], dir.path());
    assert_eq!(code(&out), 0, "{out:?}");
    let text = stdout(&out);
    assert!(text.lines().any(|l| l == "slope = -1.000"), "{text}");
    assert!(text.contains("window = 5012..10000"), "{text}");
    assert_eq!(fs::read_to_string(dir.path().join("s.csv.rate")).unwrap(), text);

    let out = nashzero(&["rate", "--input", "s.csv", "--window", "0.01"], dir.path());
    assert!(stdout(&out).contains("window = 100..10000"));
}

#[test]
fn rate_rejects_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    for (name, body) in [
        ("empty.csv", ""),
        ("header.csv", "run_id,t,dist_sq\n"),
        ("wrong.csv", "run,t,d\n0,1,1.0\n"),
        ("short.csv", "run_id,t,dist_sq\n0,1\n"),
    ] {
        fs::write(dir.path().join(name), body).unwrap();
        let out = nashzero(&["rate", "--input", name], dir.path());
        assert_eq!(code(&out), 2, "{name}: {out:?}");
    }
    let out = nashzero(&["rate", "--input", "empty.csv", "--window", "1.5"], dir.path());
    assert_eq!(code(&out), 2);
}

#[test]
fn rate_reads_run_output() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&nashzero(&[SMALL, &["--out", "r.csv"]].concat(), dir.path())), 0);
    let out = nashzero(&["rate", "--input", "r.csv"], dir.path());
    assert_eq!(code(&out), 0, "{out:?}");
    let text = stdout(&out);
    let window = text.lines().find_map(|l| l.strip_prefix("window = ")).unwrap();
    let (lo, hi) = window.split_once("..").unwrap();
    assert!(lo.parse::<u64>().unwrap() >= 1500, "{text}");
    assert_eq!(hi, "3000");
}

#[test]
fn verify_suites() {
    let dir = tempfile::tempdir().unwrap();
    for (game, suite) in [
        ("example1_wide", "svs"),
        ("example1_wide", "gradients"),
        ("example1_wide", "chung"),
        ("quadratic", "lemma1"),
    ] {
        let out = nashzero(&["verify", "--game", game, "--suite", suite, "--samples", "100000"], dir.path());
        assert_eq!(code(&out), 0, "{game} {suite}: {out:?}");
        let text = stdout(&out);
        assert!(text.contains("[PASS]") && !text.contains("[FAIL]"), "{text}");
    }
}

#[test]
fn verify_failure_and_usage() {
    let dir = tempfile::tempdir().unwrap();
    let out = nashzero(&["verify", "--game", "example1_wide", "--suite", "nope"], dir.path());
    assert_eq!(code(&out), 2);
    let out = nashzero(&["verify", "--game", "nope", "--suite", "svs"], dir.path());
    assert_eq!(code(&out), 2);
    let out = nashzero(&["verify", "--game", "example1_wide", "--suite", "prop1", "--samples", "2000"], dir.path());
    assert_eq!(code(&out), 1, "{out:?}");
    assert!(stdout(&out).contains("[FAIL]"));
}

#[test]
fn games_lists_catalog() {
    let dir = tempfile::tempdir().unwrap();
    let out = nashzero(&["games"], dir.path());
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    for name in ["example1_wide", "example1_unit", "example1_neg", "quadratic", "bilinear"] {
        assert!(text.contains(name));
    }
}
