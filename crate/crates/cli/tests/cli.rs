use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_thumbaxis"));
    c.env_remove("THUMBAXIS_WORKERS");
    c
}

fn reference() -> Value {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/reference_hand.json");
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn set_steps(cfg: &mut Value, steps: [u64; 6]) {
    for (axis, n) in ["x_mm", "y_mm", "z_mm", "roll_deg", "pitch_deg", "yaw_deg"].into_iter().zip(steps) {
        cfg["grid"][axis]["steps"] = n.into();
    }
}

fn write_config(dir: &Path, cfg: &Value) -> PathBuf {
    let path = dir.join("hand.json");
    fs::write(&path, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    path
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Desk-scale grid with known valid configurations.
fn desk(dir: &Path) -> PathBuf {
    let mut cfg = reference();
    set_steps(&mut cfg, [6; 6]);
    write_config(dir, &cfg)
}

fn omega_arg(v: &Value) -> String {
    v.as_array().unwrap().iter().map(|x| x.as_f64().unwrap().to_string()).collect::<Vec<_>>().join(",")
}

#[test]
fn singleton_grid_writes_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = reference();
    let omega = [85.714_285_714_285_72, 122.857_142_857_142_86, 65.714_285_714_285_72, -32.142_857_142_857_146, 8.571_428_571_428_573, 64.285_714_285_714_29];
    for (axis, v) in ["x_mm", "y_mm", "z_mm", "roll_deg", "pitch_deg", "yaw_deg"].into_iter().zip(omega) {
        cfg["grid"][axis] = serde_json::json!({ "range": [v, v], "steps": 1 });
    }
    let path = write_config(dir.path(), &cfg);
    let o = run(bin().arg("optimize").arg(&path).arg("-q"));
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("out/topk.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows.len(), 2, "{csv}");
    assert!(rows[0].starts_with("rank,index,x_mm"));
    let res: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("out/result.json")).unwrap()).unwrap();
    assert_eq!(res["valid_count"], 1);
    let got: Vec<f64> = res["omega_opt"]["config_mm_deg"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    for (g, w) in got.iter().zip(omega) {
        assert!((g - w).abs() < 1e-9);
    }
    assert!(dir.path().join("out/heatmap.svg").exists());
}

#[test]
fn infeasible_requirements_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = reference();
    set_steps(&mut cfg, [3; 6]);
    cfg["requirements"]["precision_radius_mm"] = serde_json::json!([200.0, 300.0]);
    let path = write_config(dir.path(), &cfg);
    let o = run(bin().arg("optimize").arg(&path).arg("-q"));
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let res: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("out/result.json")).unwrap()).unwrap();
    assert!(res["top_k"].as_array().unwrap().is_empty());
    assert!(res["omega_opt"].is_null());
    assert!(!dir.path().join("out/heatmap.svg").exists());
}

#[test]
fn repeat_runs_give_identical_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = reference();
    set_steps(&mut cfg, [10, 10, 10, 10, 10, 1]);
    let path = write_config(dir.path(), &cfg);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(run(bin().arg("optimize").arg(&path).arg("-q").arg("--out").arg(&a).args(["--workers", "1"])).status.code().unwrap() != 1);
    let o = run(bin().arg("optimize").arg(&path).arg("-q").arg("--out").arg(&b).env("THUMBAXIS_WORKERS", "3"));
    assert_ne!(o.status.code(), Some(1), "{}", stderr(&o));
    for f in ["result.json", "topk.csv", "heatmap.svg"] {
        let (x, y) = (a.join(f), b.join(f));
        if x.exists() || y.exists() {
            assert_eq!(fs::read(x).unwrap(), fs::read(y).unwrap(), "{f}");
        }
    }
    let rt: Value = serde_json::from_str(&fs::read_to_string(b.join("runtime.json")).unwrap()).unwrap();
    assert_eq!(rt["runtime"]["workers"], 3);
}

#[test]
fn interrupted_run_resumes_from_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let path = desk(dir.path());
    let cp = dir.path().join("scan.checkpoint.json");
    let full = dir.path().join("full");
    let part = dir.path().join("part");
    assert!(run(bin().arg("optimize").arg(&path).arg("-q").arg("--out").arg(&full)).status.success());
    let o = run(bin().arg("optimize").arg(&path).arg("-q").arg("--out").arg(&part).arg("--checkpoint").arg(&cp).args(["--stop-after", "5000"]));
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("stopped early"));
    assert!(cp.exists());
    let o = run(bin().arg("optimize").arg(&path).arg("-q").arg("--out").arg(&part).arg("--checkpoint").arg(&cp));
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(fs::read(full.join("result.json")).unwrap(), fs::read(part.join("result.json")).unwrap());
    assert_eq!(fs::read(full.join("topk.csv")).unwrap(), fs::read(part.join("topk.csv")).unwrap());
}

#[test]
fn check_round_trips_the_winner() {
    let dir = tempfile::tempdir().unwrap();
    let path = desk(dir.path());
    assert!(run(bin().arg("optimize").arg(&path).arg("-q")).status.success());
    let res: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("out/result.json")).unwrap()).unwrap();
    let best = &res["omega_opt"];
    let o = run(bin().arg("check").arg(&path).arg("--omega").arg(omega_arg(&best["config_mm_deg"])));
    assert!(o.status.success(), "{}", stderr(&o));
    let report: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(report["valid"], true);
    assert_eq!(report["transition"]["overall"], best["interval"]);
    assert_eq!(report["problem_hash"], res["metadata"]["problem_hash"]);
}

#[test]
fn check_all_zero_omega_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let path = desk(dir.path());
    let a = run(bin().arg("check").arg(&path).args(["--omega", "0,0,0,0,0,0"]));
    let b = run(bin().arg("check").arg(&path).args(["--omega", "0,0,0,0,0,0"]));
    assert_eq!(a.status.code(), b.status.code());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn malformed_input_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = desk(dir.path());
    let o = run(bin().arg("check").arg(&path).args(["--omega", "1,2,3,4,5"]));
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("6 values"));
    let o = run(bin().arg("transition").arg(&path).args(["--omega", "90,110,60,-22.5,15,0", "--width", "-3"]));
    assert_eq!(o.status.code(), Some(1));
    let o = run(bin().arg("frobnicate"));
    assert_eq!(o.status.code(), Some(1));
    assert!(run(bin().arg("--help")).status.success());
}

#[test]
fn config_errors_name_field_and_line() {
    let dir = tempfile::tempdir().unwrap();
    let text = serde_json::to_string_pretty(&reference()).unwrap().replace("\"theta_min_deg\": 110.0", "\"theta_min_deg\": true");
    let path = dir.path().join("broken.json");
    fs::write(&path, text).unwrap();
    let o = run(bin().arg("optimize").arg(&path));
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("requirements.theta_min_deg") && err.contains("line"), "{err}");
    let o = run(bin().arg("optimize").arg(dir.path().join("missing.json")));
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn verify_passes_and_catches_a_perturbation() {
    let o = run(bin().arg("verify"));
    assert!(o.status.success(), "{}", stdout(&o));
    let out = stdout(&o);
    assert!(out.starts_with("case_id,inputs,oracle,main,abs_dev,rel_dev,tolerance,pass"));
    assert!(out.lines().any(|l| l.starts_with("delta_m,")));
    let o = run(bin().args(["verify", "--perturb-mm", "1"]));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn transition_holds_inside_and_fails_outside() {
    let dir = tempfile::tempdir().unwrap();
    let path = desk(dir.path());
    assert!(run(bin().arg("optimize").arg(&path).arg("-q")).status.success());
    let res: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("out/result.json")).unwrap()).unwrap();
    let best = &res["omega_opt"];
    let (lo, hi) = (best["interval"]["lo"].as_f64().unwrap(), best["interval"]["hi"].as_f64().unwrap());
    let omega = omega_arg(&best["config_mm_deg"]);
    let widths = format!("{},{},{}", lo, 0.5 * (lo + hi), hi + 2.0);
    let o = run(bin().arg("transition").arg(&path).args(["--omega", &omega, "--width", &widths]));
    assert!(o.status.success(), "{}", stderr(&o));
    let err = stderr(&o);
    let verdicts: Vec<&str> = err.lines().filter(|l| l.starts_with("width")).collect();
    assert_eq!(verdicts.len(), 3, "{err}");
    assert!(verdicts[0].contains("PASS") && verdicts[1].contains("PASS") && verdicts[2].contains("FAIL"), "{err}");
    let out = stdout(&o);
    assert!(out.starts_with("width_mm,index_sample,j,distance_mm,gap_mm,hold_ok"));

    let o = run(bin().arg("transition").arg(&path).args(["--omega", "1000,1000,1000,0,0,0", "--width", "5"]));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("NOT CAPABLE"));
}
