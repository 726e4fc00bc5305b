use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_elastic-pinn"));
    cmd.env("RUST_LOG", "warn");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn solve_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("rod");
    let o = run(&[
        "solve",
        "--problem",
        "rod1d",
        "--loss",
        "collocation",
        "--seed",
        "0",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("rms U"));
    for f in ["fields.csv", "report.json", "model.txt"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let csv = std::fs::read_to_string(out.join("fields.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("x,U,eps_x,sigma_x"));
    assert_eq!(csv.lines().count(), 52);
}

#[test]
fn unknown_loss_is_a_usage_error_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("never");
    let o = run(&["solve", "--problem", "rod1d", "--loss", "lsq", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("lsq"));
    assert!(!out.exists());

    let o = run(&["solve", "--problem", "beam", "--loss", "energy"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_problem_fails() {
    let o = run(&["solve", "--loss", "energy"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("no problem"));
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    let out = dir.path().join("plate");
    write(
        &cfg,
        &format!(
            "# small plate run\nproblem = plate2d-patch\nloss = energy\nseed = 3\nmax_iter = 4\n\
             resolution = 6\nhidden = 5,5\nout = {}\n",
            out.display()
        ),
    );
    let o = run(&["solve", "--config", cfg.to_str().unwrap(), "--seed", "8"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = std::fs::read_to_string(out.join("report.json")).unwrap();
    assert!(report.contains("\"seed\": 8"));
    assert!(report.contains("\"points_per_axis\": 6"));
    assert_eq!(std::fs::read_to_string(out.join("fields.csv")).unwrap().lines().count(), 37);
}

#[test]
fn bad_config_file_fails() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    write(&cfg, "problem = rod1d\nloss = energy\nspeed = 3\n");
    let o = run(&["solve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));

    let o = run(&["solve", "--config", dir.path().join("missing.cfg").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn check_subcommand_passes() {
    let o = run(&["check", "--networks", "2"]);
    assert!(o.status.success(), "{}", stdout(&o));
    let text = stdout(&o);
    assert!(text.contains("0 failed"));
    assert!(!text.contains("FAIL "));
}
