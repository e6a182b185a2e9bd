//! The `lpvmpc` binary end to end.

use std::path::Path;
use std::process::{Command, Output};

use lpvmpc::config::ConfigFile;
use lpvmpc::sim::{STUDY_HEADER, SUMMARY_HEADER, TIMING_HEADER, TRAJECTORY_HEADER};

fn lpvmpc(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lpvmpc"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

fn first_line(path: &Path) -> String {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .next()
        .unwrap_or_default()
        .to_string()
}

#[test]
fn dump_defaults_round_trips() {
    let tmp = tempfile::tempdir().unwrap();
    let out = lpvmpc(&["dump-defaults"], tmp.path());
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(ConfigFile::parse(&text).unwrap(), ConfigFile::default());
    let cfg = write(tmp.path(), "d.toml", &text);
    let again = lpvmpc(&["--config", &cfg, "dump-defaults"], tmp.path());
    assert_eq!(String::from_utf8(again.stdout).unwrap(), text);
}

#[test]
fn overrides_show_in_dump() {
    let tmp = tempfile::tempdir().unwrap();
    let out = lpvmpc(
        &[
            "--controller",
            "lpv_trust",
            "--trust",
            "off",
            "--horizon",
            "12",
            "--seed",
            "7",
            "dump-defaults",
        ],
        tmp.path(),
    );
    assert!(out.status.success());
    let cfg = ConfigFile::parse(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(cfg.controller.kind, lpvmpc::controller::ControllerKind::LpvStandard);
    assert_eq!(cfg.controller.horizon, 12);
    assert_eq!(cfg.study.horizons, vec![12]);
    assert_eq!((cfg.study.seed, cfg.sim.seed), (7, 7));
}

#[test]
fn run_writes_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.toml", "[sim]\nduration = 40\n");
    let out = lpvmpc(&["--config", &cfg, "--out-dir", "res", "run"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let res = tmp.path().join("res");
    assert_eq!(first_line(&res.join("trajectory.csv")), TRAJECTORY_HEADER);
    assert_eq!(first_line(&res.join("summary.csv")), SUMMARY_HEADER);
    assert_eq!(
        std::fs::read_to_string(res.join("trajectory.csv"))
            .unwrap()
            .lines()
            .count(),
        42
    );
    assert!(res.join("plot.csv").exists());
}

#[test]
fn run_with_blocked_road_reports_infeasible_steps() {
    let tmp = tempfile::tempdir().unwrap();
    // obstacle spanning the whole road a few meters ahead
    let body =
        "[sim]\nduration = 40\n\n[[obstacles]]\ncx = 155.996\ncy = 10.18\nrx = 4.0\nry = 4.0\nside = \"right\"\n";
    let cfg = write(tmp.path(), "c.toml", body);
    let out = lpvmpc(&["--config", &cfg, "--trust", "off", "run"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("infeasible steps"));
}

#[test]
fn bad_inputs_exit_1() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "bad.toml", "[controller]\nhorizon = 8\nhorizn = 3\n");
    let out = lpvmpc(&["--config", &cfg, "dump-defaults"], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3") && err.contains("horizn"), "{err}");

    let out = lpvmpc(&["--controller", "nmpc_sqp", "--trust", "on", "run"], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    let out = lpvmpc(&["--horizon", "0", "run"], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    let out = lpvmpc(&["--config", "missing.toml", "run"], tmp.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn compare_writes_timing() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.toml", "[sim]\nduration = 30\n");
    let out = lpvmpc(&["--config", &cfg, "--out-dir", "res", "compare"], tmp.path());
    assert_eq!(out.status.code(), Some(0));
    let timing = std::fs::read_to_string(tmp.path().join("res/timing.csv")).unwrap();
    let lines: Vec<&str> = timing.lines().collect();
    assert_eq!(lines[0], TIMING_HEADER);
    assert!(lines.iter().any(|l| l.starts_with("lpv_trust,tracking,30,")));
    assert!(lines.iter().any(|l| l.starts_with("nmpc_sqp,tracking,30,")));
    assert!(tmp.path().join("res/inputs.csv").exists());
}

#[test]
fn small_study_succeeds() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "c.toml",
        "[sim]\nduration = 120\n\n[study]\ncount = 2\nradius_max = 1.6\n",
    );
    let out = lpvmpc(
        &["--config", &cfg, "--horizon", "8", "--out-dir", "res", "study"],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
    let study = std::fs::read_to_string(tmp.path().join("res/study.csv")).unwrap();
    assert_eq!(study.lines().next().unwrap(), STUDY_HEADER);
    assert_eq!(study.lines().count(), 4);
}
