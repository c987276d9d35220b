use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn irsr(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_irsr")).args(args).current_dir(cwd).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn unknown_detector_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = irsr(&["detect", "--input", ".", "--detector", "rcnn", "--out", "x"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("tophat"), "{}", stderr(&o));
}

#[test]
fn unknown_gradcheck_target_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = irsr(&["gradcheck", "--target", "whole-net"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_input_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let o = irsr(&["degrade", "--input", "nowhere", "--out", "lr"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("nowhere"), "{}", stderr(&o));
}

#[test]
fn gradcheck_prints_a_passing_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = irsr(&["gradcheck", "--target", "cdconv", "--seed", "2"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["passed"], true);
    assert_eq!(v["seed"], 2);
}

#[test]
fn malformed_detector_params_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert!(irsr(&["synth", "--frames", "2", "--out", "hr"], p).status.success());
    fs::write(p.join("params.toml"), "# ok\ntophat.se = \n").unwrap();
    let o = irsr(&["detect", "--input", "hr", "--detector", "tophat", "--params", "params.toml", "--out", "d"], p);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
}

#[test]
fn synth_degrade_and_detect_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert!(irsr(&["synth", "--seed", "3", "--frames", "3", "--out", "hr"], p).status.success());
    assert!(p.join("hr/synth_spec.toml").is_file());
    assert!(p.join("hr/annotations.txt").is_file());
    assert!(irsr(&["degrade", "--input", "hr", "--out", "lr"], p).status.success());
    let lr = irsr::data::load_sequence(&p.join("lr")).unwrap();
    assert_eq!((lr.len(), lr.size()), (3, (16, 16)));
    assert!(lr.annotations().is_some());

    let o = irsr(&["detect", "--input", "hr", "--detector", "tophat", "--out", "d"], p);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(p.join("d/candidates.csv")).unwrap();
    assert!(csv.starts_with("frame,x,y,score,area\n"));
    assert_eq!(irsr::data::list_maps(&p.join("d")).unwrap().len(), 3);
    assert!(p.join("d/preview/frame_0000.png").is_file());
    let report: serde_json::Value = serde_json::from_slice(&fs::read(p.join("d/detect_report.json")).unwrap()).unwrap();
    assert_eq!(report["params"]["tophat"]["se"], 5);
}

#[test]
fn train_flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert!(irsr(&["synth", "--frames", "3", "--out", "hr"], p).status.success());
    fs::write(p.join("manifest.txt"), "train hr\n").unwrap();
    fs::write(p.join("run.toml"), "[model]\nframes = 3\n[train]\niterations = 4\nlr = 0.01\n").unwrap();
    let o = irsr(&["train", "--manifest", "manifest.txt", "--config", "run.toml", "--lr", "0.002", "--out", "run"], p);
    assert!(o.status.success(), "{}", stderr(&o));
    let echo: serde_json::Value = serde_json::from_slice(&fs::read(p.join("run/run_config.json")).unwrap()).unwrap();
    assert_eq!(echo["model"]["frames"], 3);
    assert_eq!(echo["train"]["iterations"], 4);
    assert_eq!(echo["train"]["lr"], 0.002);
    let losses = fs::read_to_string(p.join("run/loss.csv")).unwrap();
    assert!(losses.starts_with("iteration,loss,lr,best\n"));

    let o = irsr(
        &["train", "--manifest", "manifest.txt", "--resume", "run/checkpoint.ckpt", "--iterations", "6", "--out", "run2"],
        p,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let echo: serde_json::Value = serde_json::from_slice(&fs::read(p.join("run2/run_config.json")).unwrap()).unwrap();
    assert_eq!(echo["start_iteration"], 4);
    assert_eq!(echo["model"]["frames"], 3);

    fs::write(p.join("bad.toml"), "[train]\niters = 4\n").unwrap();
    let o = irsr(&["train", "--manifest", "manifest.txt", "--config", "bad.toml", "--out", "r3"], p);
    assert_eq!(o.status.code(), Some(1));
}
