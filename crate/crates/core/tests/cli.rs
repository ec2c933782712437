//! Exit codes, write-back and byte-level reproducibility of the binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use otfs_radar::scenario::ScenarioFile;

const BIN: &str = env!("CARGO_BIN_EXE_otfs-radar");
const DESK: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../scenarios/desk.json");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn read_dir(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn malformed_scenario_exits_with_config_code() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.json");
    fs::write(&bad, r#"{"seed": 1, "array": {"elements": "sixteen"}}"#).unwrap();
    let o = run(&["synth-beams", "--scenario", bad.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("array"), "{err}");
}

#[test]
fn invalid_values_and_missing_alpha_exit_with_config_code() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    let mut sc = ScenarioFile::default();
    sc.discovery.ranges_m = vec![20.0, 500.0];
    let path = tmp.path().join("range.json");
    sc.save(&path).unwrap();
    assert_eq!(code(&run(&["discover", "--scenario", path.to_str().unwrap(), "--out", out])), 2);
    // no alpha in the built-in defaults
    assert_eq!(code(&run(&["discover", "--trials", "1", "--out", out])), 2);
    assert_eq!(code(&run(&["track", "--profile", "huge", "--out", out])), 2);
}

#[test]
fn unreachable_false_alarm_target_exits_with_calibration_code() {
    let tmp = tempfile::tempdir().unwrap();
    let mut sc = ScenarioFile::default();
    sc.cfar.calibration_trials = 2;
    let path = tmp.path().join("s.json");
    sc.save(&path).unwrap();
    let o = run(&["calibrate-cfar", "--scenario", path.to_str().unwrap(), "--pfa", "1e-9", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(ScenarioFile::load(&path).unwrap().cfar.alpha, None);
}

#[test]
fn calibration_writes_alpha_back_into_the_scenario() {
    let tmp = tempfile::tempdir().unwrap();
    let mut sc = ScenarioFile::default();
    sc.cfar.calibration_trials = 20;
    let path = tmp.path().join("s.json");
    sc.save(&path).unwrap();
    let out = tmp.path().join("out");
    let o = run(&["calibrate-cfar", "--scenario", path.to_str().unwrap(), "--pfa", "0.01", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let back = ScenarioFile::load(&path).unwrap();
    let alpha = back.cfar.alpha.expect("alpha written back");
    assert!(alpha > 0.0);
    assert!(out.join("calibration.csv").exists());
    assert!(out.join("scenario.calibrated.json").exists());
    let csv = fs::read_to_string(out.join("calibration.csv")).unwrap();
    assert!(csv.contains(&format!("{alpha}")), "{csv}");
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    for (cmd, trials) in [("synth-beams", "1"), ("discover", "3"), ("track", "3"), ("crlb", "1")] {
        let dirs: Vec<_> = (0..2).map(|i| tmp.path().join(format!("{cmd}-{i}"))).collect();
        for d in &dirs {
            let o = run(&[cmd, "--scenario", DESK, "--seed", "11", "--trials", trials, "--out", d.to_str().unwrap()]);
            assert_eq!(code(&o), 0, "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
        }
        let (a, b) = (read_dir(&dirs[0]), read_dir(&dirs[1]));
        assert!(!a.is_empty());
        assert_eq!(a, b, "{cmd} output differs between runs");
        for (name, bytes) in &a {
            if name.ends_with(".csv") {
                let text = String::from_utf8_lossy(bytes);
                assert!(text.starts_with("# version"), "{name}");
                assert!(text.contains("# seed: 11"), "{name}");
            }
        }
    }
}

#[test]
fn seed_changes_the_output() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for (d, seed) in [(&a, "1"), (&b, "2")] {
        assert_eq!(code(&run(&["track", "--scenario", DESK, "--seed", seed, "--trials", "2", "--out", d.to_str().unwrap()])), 0);
    }
    assert_ne!(fs::read(a.join("track_trials.csv")).unwrap(), fs::read(b.join("track_trials.csv")).unwrap());
}
