use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

struct Run {
    code: i32,
    stderr: String,
    csv: Option<String>,
}

fn starsolve(dir: &Path, cmd: &str, config: &str, extra: &[&str], env: &[(&str, &str)]) -> Run {
    let cfg_path = dir.join(format!("{cmd}.json"));
    std::fs::write(&cfg_path, config).unwrap();
    let out_path: PathBuf = dir.join(format!("{cmd}.csv"));
    let _ = std::fs::remove_file(&out_path);
    let mut command = Command::new(env!("CARGO_BIN_EXE_starsolve"));
    command
        .arg(cmd)
        .arg("--config")
        .arg(&cfg_path)
        .arg("--output")
        .arg(&out_path)
        .args(extra)
        .env_remove("STARSOLVE_THREADS");
    for (k, v) in env {
        command.env(k, v);
    }
    let Output { status, stderr, .. } = command.output().unwrap();
    Run {
        code: status.code().unwrap(),
        stderr: String::from_utf8(stderr).unwrap(),
        csv: std::fs::read_to_string(&out_path).ok(),
    }
}

fn rows(csv: &str) -> Vec<Vec<f64>> {
    csv.lines()
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect()
}

fn column(csv: &str, name: &str) -> Vec<f64> {
    let idx = csv.lines().next().unwrap().split(',').position(|h| h == name).unwrap();
    rows(csv).iter().map(|r| r[idx]).collect()
}

fn reported_iterations(stderr: &str) -> Vec<usize> {
    stderr
        .lines()
        .filter_map(|l| l.split("GMRES iterations ").nth(1))
        .map(|rest| rest.split(',').next().unwrap().parse().unwrap())
        .collect()
}

#[test]
fn solve_expstep_bilinear() {
    let dir = TempDir::new().unwrap();
    let r = starsolve(dir.path(), "solve", r#"{"problem": "expstep", "M": 40, "mode": "bilinear"}"#, &[], &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let csv = r.csv.unwrap();
    assert_eq!(csv.lines().next().unwrap(), "t,re_vTu,im_vTu,abs_err,rel_err");
    let rel = column(&csv, "rel_err");
    assert_eq!(rel.len(), 200);
    assert!(rel.iter().all(|&e| e <= 1e-10));
    let t = column(&csv, "t");
    let re = column(&csv, "re_vTu");
    assert!((re.last().unwrap() - std::f64::consts::E).abs() < 1e-12 && t[199] == 1.0);
    assert_eq!(reported_iterations(&r.stderr).len(), 1);
}

#[test]
fn solve_components_layout_and_precision() {
    let dir = TempDir::new().unwrap();
    let r = starsolve(dir.path(), "solve", r#"{"problem": "rotation", "M": 60, "samples": [0, 0.5, 1]}"#, &["--quiet"], &[]);
    assert_eq!(r.code, 0);
    assert!(r.stderr.is_empty(), "{}", r.stderr);
    let csv = r.csv.unwrap();
    assert_eq!(csv.lines().next().unwrap(), "t,re_0,re_1,im_0,im_1");
    let data = rows(&csv);
    for row in &data {
        let t = row[0];
        assert!((row[1] - t.cos()).abs() < 1e-12 && (row[2] + t.sin()).abs() < 1e-12);
    }
    let field = csv.lines().nth(2).unwrap().split(',').nth(1).unwrap();
    let mantissa = field.trim_start_matches('-').split('e').next().unwrap();
    assert_eq!(mantissa.chars().filter(char::is_ascii_digit).count(), 17);
}

#[test]
fn empty_samples_give_header_only() {
    let dir = TempDir::new().unwrap();
    let r = starsolve(dir.path(), "solve", r#"{"problem": "expstep", "M": 20, "samples": []}"#, &[], &[]);
    assert_eq!(r.code, 0);
    assert_eq!(r.csv.unwrap(), "t,re_0,im_0\n");
}

#[test]
fn config_errors_exit_one_without_output() {
    let dir = TempDir::new().unwrap();
    for cfg in [
        r#"{"problem": "expstep", "M": 1}"#,
        r#"{"problem": "nosuch"}"#,
        r#"{"problem": {"mas": {"k": 0}}}"#,
        "{",
    ] {
        let r = starsolve(dir.path(), "solve", cfg, &[], &[]);
        assert_eq!(r.code, 1, "{cfg}: {}", r.stderr);
        assert!(r.csv.is_none());
    }
    let r = starsolve(dir.path(), "convergence", r#"{"problem": "expstep", "m_values": [1, 10]}"#, &[], &[]);
    assert_eq!(r.code, 1);
    assert!(r.csv.is_none());
    let r = starsolve(dir.path(), "convergence", r#"{"problem": "expstep"}"#, &[], &[]);
    assert_eq!(r.code, 1);
    let r = starsolve(dir.path(), "solve", r#"{"problem": "expstep", "M": 10}"#, &[], &[("STARSOLVE_THREADS", "many")]);
    assert_eq!(r.code, 1);
    let status = Command::new(env!("CARGO_BIN_EXE_starsolve")).arg("frobnicate").output().unwrap().status;
    assert_eq!(status.code(), Some(1));
}

#[test]
fn non_convergence_exits_two() {
    let dir = TempDir::new().unwrap();
    let r = starsolve(dir.path(), "solve", r#"{"problem": "expstep", "M": 40, "max_iter": 7}"#, &[], &[]);
    assert_eq!(r.code, 2, "{}", r.stderr);
    assert!(r.csv.is_none());
    assert!(r.stderr.contains("did not converge"));
}

#[test]
fn accepted_stagnation_warns_and_succeeds() {
    let dir = TempDir::new().unwrap();
    let r = starsolve(dir.path(), "solve", r#"{"problem": "expstep", "M": 40, "max_iter": 9}"#, &["--quiet"], &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(r.stderr.contains("warning:"));
    assert!(r.csv.is_some());
}

#[test]
fn svd_of_zero_dynamics_has_rank_one() {
    let dir = TempDir::new().unwrap();
    let r = starsolve(dir.path(), "svd", r#"{"problem": "zero", "M": 30}"#, &[], &[]);
    assert_eq!(r.code, 0);
    assert!(r.stderr.contains("numerical rank 1 of 3"), "{}", r.stderr);
    let csv = r.csv.unwrap();
    assert_eq!(csv.lines().next().unwrap(), "index,sigma");
    let sigma = column(&csv, "sigma");
    assert_eq!(column(&csv, "index"), vec![1.0, 2.0, 3.0]);
    assert!(sigma.windows(2).all(|w| w[0] >= w[1]));
}

#[test]
fn convergence_sweeps() {
    let dir = TempDir::new().unwrap();
    let r = starsolve(dir.path(), "convergence", r#"{"problem": "expstep", "m_values": [10, 20, 40]}"#, &[], &[]);
    assert_eq!(r.code, 0);
    let csv = r.csv.unwrap();
    assert_eq!(csv.lines().next().unwrap(), "M,max_abs_err,max_rel_err,gmres_iters,wall_time_ms");
    let err = column(&csv, "max_abs_err");
    // M = 20 already reaches the roundoff floor.
    assert!(err[0] > err[1] && err[2] <= 1e-13, "{err:?}");

    let r = starsolve(dir.path(), "convergence", r#"{"problem": "cosexp", "m_values": [20, 40, 60]}"#, &[], &[]);
    let err = column(&r.csv.unwrap(), "max_abs_err");
    assert!(err[0] > err[1] && err[1] > err[2], "{err:?}");
}

#[test]
fn mas_k4_solve_and_convergence() {
    let dir = TempDir::new().unwrap();
    let r = starsolve(
        dir.path(),
        "solve",
        r#"{"problem": {"mas": {"k": 4, "nu": 1e4, "t_phys": 1e-3}}, "M": 1000, "gmres_tol": 1e-13, "samples": 200}"#,
        &[],
        &[("STARSOLVE_THREADS", "1")],
    );
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(rows(&r.csv.unwrap()).len(), 200);
    assert!(reported_iterations(&r.stderr)[0] <= 100);

    let r = starsolve(
        dir.path(),
        "convergence",
        r#"{"problem": {"mas": {"k": 4}}, "m_values": [250, 500, 1000], "samples": 100, "mode": "bilinear"}"#,
        &["--quiet"],
        &[],
    );
    assert_eq!(r.code, 0, "{}", r.stderr);
    let err = column(&r.csv.unwrap(), "max_abs_err");
    assert!(err[2] <= err[0], "{err:?}");
}

#[test]
fn output_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let cfg = r#"{"problem": {"mas": {"k": 2}}, "M": 300, "seed": 9, "samples": 50}"#;
    let a = starsolve(dir.path(), "solve", cfg, &[], &[]).csv.unwrap();
    let b = starsolve(dir.path(), "solve", cfg, &[], &[("STARSOLVE_THREADS", "2")]).csv.unwrap();
    assert_eq!(a, b);
}

#[test]
fn inline_system() {
    let dir = TempDir::new().unwrap();
    let cfg = r#"{"problem": {"dim": 1, "terms": [{"entries": [[0, 0, 1.0]], "profile": {"poly": {"coeffs": [0, 2]}}}], "initial": [1]},
                  "M": 30, "samples": [0.25, 1], "mode": "bilinear"}"#;
    let r = starsolve(dir.path(), "solve", cfg, &[], &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    // u' = 2t u  ⇒  u = exp(t²); errors are against the RK45 oracle.
    let csv = r.csv.unwrap();
    let re = column(&csv, "re_vTu");
    assert!((re[1] - 1f64.exp()).abs() < 1e-11);
    assert!(column(&csv, "abs_err").iter().all(|&e| e < 1e-10));
}
