//! End-to-end checks of the hetex binary: exit codes, output files, seed
//! precedence.

use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_hetex")
}

fn scenarios() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn write_tiny_scenario(dir: &Path) -> PathBuf {
    let path = dir.join("tiny.json");
    std::fs::write(
        &path,
        r#"{
  "name": "tiny",
  "bounds": {"min": [0,0,0], "max": [6,6,2]},
  "resolution": 0.2,
  "explore_bounds": {"min": [0,0,0], "max": [6,6,2]},
  "boxes": [],
  "uavs": [
    {"id": "puav", "start": [1.1,1.1,1.1], "heading": 0.0, "radius": 0.45,
     "speed": 1.0,
     "sensor": {"kind": "omni3d", "h_fov_deg": 360, "v_fov_deg": 90,
                "max_range": 8, "n_azimuth": 24, "n_elevation": 8}},
    {"id": "suav", "start": [4.9,4.9,1.1], "heading": 0.0, "radius": 0.25,
     "speed": 1.0,
     "sensor": {"kind": "cone", "h_fov_deg": 87, "v_fov_deg": 58,
                "max_range": 4, "n_azimuth": 13, "n_elevation": 9}}
  ]
}"#,
    )
    .unwrap();
    path
}

fn write_quick_config(dir: &Path, extra: &str) -> PathBuf {
    let path = dir.join("quick.cfg");
    std::fs::write(
        &path,
        format!("r_max = 1.0\nmin_cluster_for_sampling = 1000\n{extra}"),
    )
    .unwrap();
    path
}

#[test]
fn validate_reports_ok() {
    let out = Command::new(bin())
        .args(["validate", "--scenario"])
        .arg(scenarios().join("office_s.json"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{out:?}");
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("office_s: ok"), "{text}");
}

#[test]
fn validate_rejects_bad_schema_with_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, r#"{"bounds": {"min": [0,0,0], "max": [1,1,1]}}"#).unwrap();
    let out = Command::new(bin())
        .args(["validate", "--scenario"])
        .arg(&path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "{out:?}");
}

#[test]
fn run_writes_outputs_and_flags_incomplete() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_tiny_scenario(dir.path());
    let config = write_quick_config(dir.path(), "t_max = 5\ncompletion_target = 0.99\n");
    let out_dir = dir.path().join("out");
    let out = Command::new(bin())
        .args(["run", "--scenario"])
        .arg(&scenario)
        .args(["--allocator", "greedy", "--seed", "4", "--out"])
        .arg(&out_dir)
        .arg("--config")
        .arg(&config)
        .output()
        .unwrap();
    // five simulated seconds cannot reach 99 %: incomplete, exit 1
    assert_eq!(out.status.code(), Some(1), "{out:?}");
    for name in ["timeline.csv", "events.csv", "timings.csv", "summary.json", "map.txt"] {
        assert!(out_dir.join(name).exists(), "missing {name}");
    }
    let summary = std::fs::read_to_string(out_dir.join("summary.json")).unwrap();
    assert!(summary.contains("\"completed\": false"), "{summary}");
    assert!(summary.contains("\"seed\": 4"), "{summary}");
}

#[test]
fn env_seed_overrides_flag() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_tiny_scenario(dir.path());
    let config = write_quick_config(dir.path(), "t_max = 2\ncompletion_target = 0.99\n");
    let out_dir = dir.path().join("out");
    let out = Command::new(bin())
        .args(["run", "--scenario"])
        .arg(&scenario)
        .args(["--allocator", "mcf", "--seed", "4", "--out"])
        .arg(&out_dir)
        .arg("--config")
        .arg(&config)
        .env("HETEX_SEED", "99")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1), "{out:?}");
    let summary = std::fs::read_to_string(out_dir.join("summary.json")).unwrap();
    assert!(summary.contains("\"seed\": 99"), "{summary}");
}

#[test]
fn unknown_config_key_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_tiny_scenario(dir.path());
    let config = dir.path().join("bad.cfg");
    std::fs::write(&config, "not_a_key = 1\n").unwrap();
    let out = Command::new(bin())
        .args(["run", "--scenario"])
        .arg(&scenario)
        .args(["--allocator", "mcf", "--out"])
        .arg(dir.path().join("out"))
        .arg("--config")
        .arg(&config)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "{out:?}");
}
