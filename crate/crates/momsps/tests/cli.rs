use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use momsps::problem_file::parse_problem;
use tempfile::TempDir;

const BASE: &str = "\
version = 1
[problem]
kind = least_squares  n = 60  d = 8  cond = 100  seed = 3
[step]
rule = mom_sps_max  beta = 0.2  c = 1  gamma_b = 0.05
[run]
T = 400  batch_size = 5  seeds = 0..3
[bounds]
checks = thm31  sigma2_samples = 2000
";

fn momsps(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_momsps"))
        .args(args)
        .arg("--out")
        .arg(out)
        .arg("--quiet")
        .env_remove("MOMSPS_OUT_DIR")
        .output()
        .expect("spawn momsps")
}

fn config(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    fs::write(&path, text).unwrap();
    path
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn run_is_byte_identical_across_invocations() {
    let tmp = TempDir::new().unwrap();
    let cfg = config(&tmp, "exp.cfg", BASE);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        let o = momsps(&["run", "--config", cfg.to_str().unwrap()], dir);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    let first = read_dir_sorted(&a);
    let names: Vec<&str> = first.iter().map(|f| f.0.as_str()).collect();
    assert_eq!(names, ["bounds_thm31.txt", "cesaro.csv", "summary.csv", "trajectory.csv"]);
    assert_eq!(first, read_dir_sorted(&b));
}

#[test]
fn check_bounds_reproduces_report_from_stored_records() {
    let tmp = TempDir::new().unwrap();
    let cfg = config(&tmp, "exp.cfg", BASE);
    let (runs, checks) = (tmp.path().join("runs"), tmp.path().join("checks"));
    assert_eq!(code(&momsps(&["run", "--config", cfg.to_str().unwrap()], &runs)), 0);
    let o = momsps(&["check-bounds", "--config", cfg.to_str().unwrap(), "--records", runs.to_str().unwrap()], &checks);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report = fs::read_to_string(checks.join("bounds_thm31.txt")).unwrap();
    assert_eq!(report, fs::read_to_string(runs.join("bounds_thm31.txt")).unwrap());
    assert!(report.contains("satisfied = true"), "{report}");
}

#[test]
fn compare_at_beta_zero_gives_identical_suboptimality() {
    let tmp = TempDir::new().unwrap();
    let text = BASE.replace("beta = 0.2", "beta = 0").replace("checks = thm31  ", "")
        + "[compare]\nrules = sps_max, mom_sps_max\n";
    let cfg = config(&tmp, "cmp.cfg", &text);
    let out = tmp.path().join("out");
    let o = momsps(&["compare", "--config", cfg.to_str().unwrap()], &out);
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    let runs = fs::read_to_string(out.join("runs.csv")).unwrap();
    assert_eq!(runs.lines().count(), 1 + 2 * 3);
    let traj = fs::read_to_string(out.join("trajectory.csv")).unwrap();
    let mut by_run: Vec<Vec<(String, String)>> = vec![Vec::new(); 6];
    for line in traj.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        let id: usize = cols[0].parse().unwrap();
        by_run[id].push((cols[2].to_string(), cols[4].to_string()));
    }
    for k in 0..3 {
        assert!(!by_run[k].is_empty());
        assert_eq!(by_run[k], by_run[k + 3], "seed index {k}");
    }
}

#[test]
fn generate_writes_a_parseable_problem() {
    let tmp = TempDir::new().unwrap();
    let cfg = config(&tmp, "exp.cfg", BASE);
    let out = tmp.path().join("gen");
    assert_eq!(code(&momsps(&["generate", "--config", cfg.to_str().unwrap()], &out)), 0);
    let p = parse_problem(&fs::read_to_string(out.join("problem.txt")).unwrap()).unwrap();
    assert_eq!((p.n(), p.dim()), (60, 8));
    assert!(p.metadata().is_some());
}

#[test]
fn replicate_f5consts_starts_at_one_and_three() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("f5");
    assert_eq!(code(&momsps(&["replicate", "f5consts"], &out)), 0);
    let csv = fs::read_to_string(out.join("f5consts.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("beta,C1,C2"));
    assert_eq!(lines.next(), Some("0,1,3"));
    assert!(out.join("f5consts_info.txt").exists());
}

#[test]
fn invalid_beta_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = config(&tmp, "bad.cfg", &BASE.replace("beta = 0.2", "beta = 1.0"));
    let o = momsps(&["run", "--config", cfg.to_str().unwrap()], &tmp.path().join("x"));
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("beta must lie in [0,1)"), "{}", stderr(&o));
    assert!(!tmp.path().join("x").exists());
}

#[test]
fn missing_horizon_is_reported() {
    let tmp = TempDir::new().unwrap();
    let cfg = config(&tmp, "bad.cfg", &BASE.replace("T = 400  ", ""));
    let o = momsps(&["run", "--config", cfg.to_str().unwrap()], &tmp.path().join("x"));
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("run.T"), "{}", stderr(&o));
}

#[test]
fn single_seed_with_checks_is_rejected_before_running() {
    let tmp = TempDir::new().unwrap();
    let cfg = config(&tmp, "one.cfg", &BASE.replace("seeds = 0..3", "seeds = 4"));
    let out = tmp.path().join("one");
    let o = momsps(&["run", "--config", cfg.to_str().unwrap()], &out);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("run.seeds"), "{}", stderr(&o));
    let cfg = config(&tmp, "exp.cfg", BASE);
    let o = momsps(&["run", "--config", cfg.to_str().unwrap(), "--seeds", "7"], &out);
    assert_eq!(code(&o), 2);
    assert!(!out.exists());
}

#[test]
fn missing_inputs_exit_with_io_code() {
    let tmp = TempDir::new().unwrap();
    let o = momsps(&["run", "--config", "/nonexistent/exp.cfg"], tmp.path());
    assert_eq!(code(&o), 1);
    let cfg = config(&tmp, "exp.cfg", BASE);
    let o = momsps(
        &["check-bounds", "--config", cfg.to_str().unwrap(), "--records", tmp.path().join("none").to_str().unwrap()],
        tmp.path(),
    );
    assert_eq!(code(&o), 1);
}

#[test]
fn unknown_preset_is_rejected() {
    let tmp = TempDir::new().unwrap();
    let o = momsps(&["replicate", "fig9"], tmp.path());
    assert_eq!(code(&o), 2);
}

#[test]
fn divergence_sets_its_exit_code() {
    let tmp = TempDir::new().unwrap();
    let text = BASE
        .replace("rule = mom_sps_max  beta = 0.2  c = 1  gamma_b = 0.05", "rule = constant  gamma = 50")
        .replace("checks = thm31  ", "");
    let cfg = config(&tmp, "div.cfg", &text);
    let out = tmp.path().join("div");
    let o = momsps(&["run", "--config", cfg.to_str().unwrap()], &out);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert!(summary.lines().skip(1).all(|l| l.split(',').nth(6) == Some("true")), "{summary}");
}

#[test]
fn out_dir_falls_back_to_env_then_config() {
    let tmp = TempDir::new().unwrap();
    let from_cfg = tmp.path().join("cfg-out");
    let text = BASE.replace("seeds = 0..3", &format!("seeds = 0, 1  out = {}", from_cfg.display()));
    let cfg = config(&tmp, "exp.cfg", &text);
    let run = |env: Option<&Path>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_momsps"));
        cmd.args(["--quiet", "run", "--config", cfg.to_str().unwrap()]).env_remove("MOMSPS_OUT_DIR");
        if let Some(e) = env {
            cmd.env("MOMSPS_OUT_DIR", e);
        }
        cmd.output().unwrap()
    };
    let env_dir = tmp.path().join("env-out");
    assert_eq!(code(&run(Some(&env_dir))), 0);
    assert!(env_dir.join("summary.csv").exists());
    assert!(!from_cfg.exists());
    assert_eq!(code(&run(None)), 0);
    assert!(from_cfg.join("summary.csv").exists());
}
