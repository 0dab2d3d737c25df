use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use momentflow::stokes::quadratic_branch_a1;
use momentflow::{read_trajectory_csv, Model};
use tempfile::TempDir;

fn momentflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_momentflow")).args(args).output().expect("binary runs")
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn disk_grows_to_radius_three() {
    let dir = TempDir::new().unwrap();
    let init = write(&dir, "disk1.json", "[[1, 0]]");
    let out = dir.path().join("disk.csv");
    let o = momentflow(&["evolve", "--model", "heleshaw", "--init", s(&init), "--t-end", "4", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let traj = read_trajectory_csv(&out).unwrap();
    assert_eq!(traj.model, Model::HeleShaw);
    assert!((traj.last().a1() - 3.0).abs() < 1e-9);
    assert_eq!(traj.last().t, 4.0);
}

#[test]
fn ode_and_continuation_csvs_agree() {
    let dir = TempDir::new().unwrap();
    let init = write(&dir, "cubic.json", "[[1, 0], [0.1, 0.05], [0.02, 0]]");
    let a = dir.path().join("ode.csv");
    let b = dir.path().join("cont.csv");
    for (method, out) in [("ode", &a), ("continuation", &b)] {
        let o = momentflow(&[
            "evolve", "--init", s(&init), "--method", method, "--t-end", "100", "--record", "log:41", "--out", s(out),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let o = momentflow(&["diff", s(&a), s(&b), "--tol", "1e-6"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
}

#[test]
fn stokes_quadratic_matches_closed_form() {
    let dir = TempDir::new().unwrap();
    let init = write(&dir, "n2.json", "[[1, 0], [0.1, 0]]");
    let out = dir.path().join("s.csv");
    let o = momentflow(&["evolve", "--model", "stokes", "--init", s(&init), "--t-end", "1", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let traj = read_trajectory_csv(&out).unwrap();
    assert_eq!(traj.model, Model::Stokes);
    assert!((traj.last().a1() - quadratic_branch_a1(1.02, 0.1, 1.0)).abs() < 1e-10);
    let o = momentflow(&["evolve", "--model", "stokes", "--method", "ode", "--init", s(&init), "--t-end", "1", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn non_univalent_start_is_refused_with_margin() {
    let dir = TempDir::new().unwrap();
    let init = write(&dir, "bad.json", "[[1, 0], [0.6, 0]]");
    let out = dir.path().join("bad.csv");
    let o = momentflow(&["evolve", "--init", s(&init), "--t-end", "1", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("derivative root at |xi| = 0.833333"), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn malformed_inputs_exit_one() {
    let dir = TempDir::new().unwrap();
    let init = write(&dir, "broken.json", "[[1, 0], [0.1");
    let out = dir.path().join("x.csv");
    let o = momentflow(&["evolve", "--init", s(&init), "--t-end", "1", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(1));
    let good = write(&dir, "disk.json", "[[1, 0]]");
    let o = momentflow(&["evolve", "--init", s(&good), "--t-end", "1", "--record", "geometric", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(1));
    let o = momentflow(&["evolve", "--init", s(&good), "--t-end", "-1", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(1));
    let o = momentflow(&["verify", "--traj", s(&init)]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn breakdown_exits_two_and_keeps_partial_trajectory() {
    let dir = TempDir::new().unwrap();
    let init = write(&dir, "n2.json", "[[1, 0], [0.1, 0]]");
    let out = dir.path().join("partial.csv");
    let o = momentflow(&["evolve", "--init", s(&init), "--t-end", "10", "--tol", "1e-300", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.lines().last().unwrap().starts_with("# breakdown: step size underflow"));
    let traj = read_trajectory_csv(&out).unwrap();
    assert!(traj.breakdown.is_some());
    assert_eq!(traj.samples.len(), 1);
}

#[test]
fn moments_tables() {
    let dir = TempDir::new().unwrap();
    let disk = write(&dir, "disk1.json", "[[1, 0]]");
    let o = momentflow(&["moments", "--init", s(&disk)]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["combinatorial"], serde_json::json!([[1.0, 0.0]]));

    let quad = write(&dir, "q.json", "[[1, 0], [0.2, 0]]");
    let v: serde_json::Value = serde_json::from_str(&stdout(&momentflow(&["moments", "--init", s(&quad)]))).unwrap();
    assert_eq!(v["quantity"], "M");
    assert!((v["combinatorial"][0][0].as_f64().unwrap() - 1.08).abs() < 1e-15);
    assert!((v["combinatorial"][1][0].as_f64().unwrap() - 0.2).abs() < 1e-15);
    assert!(v["difference"].as_array().unwrap().iter().all(|d| d.as_f64().unwrap() < 1e-12));

    let n2 = write(&dir, "n2.json", "[[1, 0], [0.1, 0]]");
    let o = momentflow(&["moments", "--init", s(&n2), "--stokes"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["quantity"], "C");
    assert!((v["combinatorial"][0][0].as_f64().unwrap() - 1.02).abs() < 1e-15);
    assert!((v["combinatorial"][1][0].as_f64().unwrap() - 0.1).abs() < 1e-15);
}

#[test]
fn verify_short_trajectory_names_the_window() {
    let dir = TempDir::new().unwrap();
    let init = write(&dir, "cubic.json", "[[1, 0], [0.1, 0], [0.05, 0]]");
    let out = dir.path().join("short.csv");
    momentflow(&["evolve", "--init", s(&init), "--t-end", "10", "--out", s(&out)]);
    for claims in ["lemma4.1", "all", "geo"] {
        let o = momentflow(&["verify", "--traj", s(&out), "--claims", claims]);
        assert_eq!(o.status.code(), Some(1));
        assert!(stderr(&o).contains("window [100,10000] unavailable"), "{}", stderr(&o));
    }
}

#[test]
fn verify_passes_on_cubic_and_disk() {
    let dir = TempDir::new().unwrap();
    let cubic = write(&dir, "cubic.json", "[[1, 0], [0.1, 0], [0.05, 0]]");
    let disk = write(&dir, "disk.json", "[[1.2, 0]]");
    let cubic_csv = dir.path().join("cubic.csv");
    let disk_csv = dir.path().join("disk.csv");
    for (init, out) in [(&cubic, &cubic_csv), (&disk, &disk_csv)] {
        let o = momentflow(&["evolve", "--init", s(init), "--method", "continuation", "--t-end", "10000", "--out", s(out)]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let report = dir.path().join("report.json");
    let o = Command::new(env!("CARGO_BIN_EXE_momentflow"))
        .args(["verify", "--traj", s(&cubic_csv), "--claims", "lemma4.1", "--report", s(&report)])
        .env("MOMENTFLOW_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    let k2 = &v["claims"][0];
    assert_eq!(k2["claim_id"], "lemma4.1.k2");
    assert!((k2["slope"].as_f64().unwrap() + 4.0).abs() < 0.1);
    for key in ["paper_anchor", "expected", "estimated", "tolerance", "pass"] {
        assert!(!k2[key].is_null(), "{key}");
    }
    assert_eq!(v["claims"][1]["slope"], "exact");

    let o = momentflow(&["verify", "--traj", s(&disk_csv), "--claims", "geo"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let o = momentflow(&["verify", "--traj", s(&disk_csv), "--claims", "stokes-geo"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn worker_pool_setting_is_validated() {
    let dir = TempDir::new().unwrap();
    let disk = write(&dir, "disk.json", "[[1, 0]]");
    let out = dir.path().join("d.csv");
    momentflow(&["evolve", "--init", s(&disk), "--t-end", "1", "--out", s(&out)]);
    let o = Command::new(env!("CARGO_BIN_EXE_momentflow"))
        .args(["verify", "--traj", s(&out)])
        .env("MOMENTFLOW_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("MOMENTFLOW_THREADS"));
}
