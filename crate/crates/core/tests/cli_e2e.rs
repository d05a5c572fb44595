use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/configs")
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nonlocal-rothe")).args(args).output().unwrap()
}

fn cfg(name: &str) -> String {
    configs().join(name).to_string_lossy().into_owned()
}

fn read(dir: &Path, file: &str) -> String {
    std::fs::read_to_string(dir.join(file)).unwrap()
}

#[test]
fn exit_code_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();

    let o = run(&["verify", "--config", &cfg("low.cfg"), "--out", out]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("0 failed"));

    let o = run(&["compare", "--config", &cfg("high.cfg"), "--other", &cfg("low.cfg"), "--out", out]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("comparison"));
    let report = read(dir.path(), "report.csv");
    assert!(report.starts_with("name,value,bound,verdict\ncomparison,"), "{report}");
    assert!(report.contains(",fail\n"));

    let o = run(&["compare", "--config", &cfg("low.cfg"), "--other", &cfg("high.cfg"), "--out", out]);
    assert_eq!(o.status.code(), Some(0));

    let o = run(&["verify", "--config", &cfg("bad.cfg"), "--out", out]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("weights diverge"));

    let o = run(&["solve", "--config", &cfg("low.cfg"), "--s", "1.5", "--out", out]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["solve", "--config", &cfg("missing.cfg"), "--out", out]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        let out = d.path().to_str().unwrap();
        for sub in ["solve", "ladder", "weights"] {
            let o = run(&[sub, "--config", &cfg("low.cfg"), "--levels", "1,2,4", "--out", out]);
            assert!(o.status.code() == Some(0), "{sub}: {}", String::from_utf8_lossy(&o.stderr));
        }
    }
    for file in ["trajectory.csv", "apriori.csv", "ladder.csv", "ladder_report.csv", "weights.csv", "tau.csv"] {
        assert_eq!(read(dirs[0].path(), file), read(dirs[1].path(), file), "{file}");
    }
}

#[test]
fn solve_output_round_trips_through_verify() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(run(&["solve", "--config", &cfg("low.cfg"), "--out", out]).status.code(), Some(0));
    let traj = read(dir.path(), "trajectory.csv");
    let mut lines = traj.lines();
    assert_eq!(lines.next(), Some("t,x,u"));
    // 17 time levels of 32 cells
    assert_eq!(lines.count(), 17 * 32);
    assert!(!traj.contains('\r'));

    let path = dir.path().join("trajectory.csv");
    let o = run(&[
        "verify",
        "--config",
        &cfg("low.cfg"),
        "--trajectory",
        path.to_str().unwrap(),
        "--out",
        out,
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn tampered_trajectory_fails_verification() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(run(&["solve", "--config", &cfg("low.cfg"), "--out", out]).status.code(), Some(0));
    let path = dir.path().join("trajectory.csv");
    let text = std::fs::read_to_string(&path).unwrap();
    let last = text.lines().count() - 1;
    let bumped: String = text
        .lines()
        .enumerate()
        .map(|(i, l)| {
            if i + 40 > last && i > 0 {
                let mut cols: Vec<String> = l.split(',').map(str::to_string).collect();
                let v: f64 = cols[2].parse().unwrap();
                cols[2] = format!("{:.16e}", v * 1.1);
                cols.join(",")
            } else {
                l.to_string()
            }
        })
        .map(|l| l + "\n")
        .collect();
    std::fs::write(&path, bumped).unwrap();
    let o = run(&["verify", "--config", &cfg("low.cfg"), "--trajectory", path.to_str().unwrap(), "--out", out]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn malformed_input_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let bad = dir.path().join("u.csv");
    std::fs::write(&bad, "x,value\n0.5,abc\n").unwrap();
    let o = run(&["solve", "--m", "8", "--u0", &format!("csv:{}", bad.display()), "--out", out]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));
    let o = run(&["solve", "--m", "8", "--nonneg", "maybe", "--out", out]);
    assert_eq!(o.status.code(), Some(2));
}
