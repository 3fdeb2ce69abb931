use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use speedlimit::dispersion::AdjointField;
use speedlimit::emission::EmissionField;
use speedlimit::io::{content_hash, read_front_csv, read_grid_series, read_trajectory_csv};
use speedlimit::objectives::{j_diff_adjoint, j_flow, j_queue};
use speedlimit::{load_scenario, SpeedLimitPolicy};

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn sample() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/data/diamond.json")
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_speedlimit"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn validate_sample_passes() {
    let o = run(&["validate", "--scenario", arg(&sample())]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().next(), Some("CFL: pass (Δt=0.0083 ≤ 0.008333)"));
}

#[test]
fn validate_reports_cfl_failure() {
    let o = run(&["validate", "--scenario", arg(&data("coarse_time.json"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).starts_with("CFL: fail"), "{}", stdout(&o));
}

#[test]
fn validate_missing_file() {
    let o = run(&["validate", "--scenario", "/nonexistent/scenario.json"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn validate_unparsable_file() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{ not json").unwrap();
    let o = run(&["validate", "--scenario", arg(&bad)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn simulate_rejects_infeasible_policy() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "simulate",
        "--scenario",
        arg(&data("tiny.json")),
        "--policy",
        "3,1,1,1,1,1",
        "--out",
        arg(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("V_1 exceeds upper bound 2"), "{}", stderr(&o));
}

#[test]
fn simulate_outputs_reproduce_objectives() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let scenario_path = data("tiny.json");
    let o = run(&[
        "simulate",
        "--scenario",
        arg(&scenario_path),
        "--policy",
        "1,1,1,1,1,1",
        "--out",
        arg(out),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    let text = fs::read_to_string(&scenario_path).unwrap();
    let scenario = load_scenario(&text).unwrap();
    let policy = SpeedLimitPolicy::uniform(&scenario, 1.0);
    let logged = read_front_csv(fs::File::open(out.join("objectives.csv")).unwrap()).unwrap();
    assert_eq!(logged.len(), 1);
    let logged = &logged[0];
    assert_eq!(logged.policy, policy.v_max);
    for v in [logged.j_flow, logged.j_diff, logged.j_queue, logged.j_poll] {
        assert!(v.is_finite() && v >= 0.0);
    }

    let traj = read_trajectory_csv(
        fs::File::open(out.join("trajectory_density.csv")).unwrap(),
        fs::File::open(out.join("trajectory_queue.csv")).unwrap(),
        &scenario,
    )
    .unwrap();
    assert_eq!(j_flow(&traj, &policy, &scenario).unwrap().to_bits(), logged.j_flow.to_bits());
    assert_eq!(j_queue(&traj, &scenario).unwrap().to_bits(), logged.j_queue.to_bits());

    let emission = EmissionField {
        values: read_grid_series(fs::File::open(out.join("emission.bin")).unwrap(), scenario.side).unwrap(),
    };
    let cache = fs::read_dir(out)
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.file_name().unwrap().to_str().unwrap().starts_with("adjoint-"))
        .expect("adjoint cache written");
    let adjoint = AdjointField {
        values: read_grid_series(fs::File::open(cache).unwrap(), scenario.side).unwrap(),
    };
    let j_diff = j_diff_adjoint(&emission, &adjoint, &scenario.phi0, &scenario).unwrap();
    assert_eq!(j_diff.to_bits(), logged.j_diff.to_bits());

    // printed vector is (-J_flow, J_poll) in the default mode
    let printed = format!("(-{}, {})", logged.j_flow, logged.j_poll);
    assert!(stdout(&o).contains(&printed), "{}", stdout(&o));
}

#[test]
fn manifest_hash_matches_input() {
    let dir = tempfile::tempdir().unwrap();
    let scenario_path = data("tiny.json");
    let o = run(&[
        "simulate",
        "--scenario",
        arg(&scenario_path),
        "--policy",
        "2,2,2,2,2,2",
        "--out",
        arg(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "simulate");
    assert_eq!(
        manifest["scenario_hash"].as_str().unwrap(),
        content_hash(&fs::read(&scenario_path).unwrap())
    );
    for file in manifest["outputs"].as_array().unwrap() {
        assert!(dir.path().join(file.as_str().unwrap()).exists(), "{file}");
    }
}

fn optimize(out: &Path, extra: &[&str]) -> Output {
    let scenario = data("tiny.json");
    let mut args = vec![
        "optimize",
        "--scenario",
        arg(&scenario),
        "--out",
        arg(out),
        "--seed",
        "5",
        "--budget",
        "40",
    ];
    args.extend_from_slice(extra);
    run(&args)
}

const FRONT_FILES: [&str; 3] = ["front.csv", "front_normalized.csv", "speed_limit_ranges.csv"];

#[test]
fn optimize_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let o = optimize(dir.path(), &[]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    for name in FRONT_FILES {
        let x = fs::read(a.path().join(name)).unwrap();
        let y = fs::read(b.path().join(name)).unwrap();
        assert_eq!(x, y, "{name} differs");
    }
}

#[test]
fn optimize_mode_sets_columns() {
    let dir = tempfile::tempdir().unwrap();
    let o = optimize(dir.path(), &["--mode", "3d", "--delta", "0.5"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = fs::read_to_string(dir.path().join("front_normalized.csv")).unwrap();
    assert!(text.lines().next().unwrap().ends_with("flow_norm,diff_norm,queue_norm"));
    let rows = read_front_csv(text.as_bytes()).unwrap();
    assert!(!rows.is_empty());
    for r in rows {
        assert!((r.j_poll - (r.j_diff + 0.5 * r.j_queue)).abs() <= 1e-15);
    }
}

#[test]
fn optimize_rejects_bad_options() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(optimize(dir.path(), &["--mode", "4d"]).status.code(), Some(1));
    let o = run(&[
        "optimize",
        "--scenario",
        arg(&data("tiny.json")),
        "--out",
        arg(dir.path()),
        "--budget",
        "0",
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn export_recomputes_pollution() {
    let dir = tempfile::tempdir().unwrap();
    let front = dir.path().join("front.csv");
    fs::write(
        &front,
        "V_1,V_2,J_flow,J_diff,J_queue,J_poll\n1,2,6,0.25,0.5,0.25\n0.5,2,4,0.125,0,0.125\n",
    )
    .unwrap();
    let out = dir.path().join("plots");
    let o = run(&[
        "export",
        "--front",
        arg(&front),
        "--coords",
        "flow-poll",
        "--delta",
        "0.5",
        "--out",
        arg(&out),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = fs::read_to_string(out.join("export_flow-poll.csv")).unwrap();
    assert_eq!(text, "V_1,V_2,J_flow,J_poll\n1,2,6,0.5\n0.5,2,4,0.125\n");

    let o = run(&[
        "export",
        "--front",
        arg(&front),
        "--coords",
        "diff-queue",
        "--out",
        arg(&out),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = fs::read_to_string(out.join("export_diff-queue.csv")).unwrap();
    assert_eq!(text, "V_1,V_2,J_diff,J_queue\n1,2,0.25,0.5\n0.5,2,0.125,0\n");
}

#[test]
fn export_empty_front() {
    let dir = tempfile::tempdir().unwrap();
    for (name, content) in [("empty.csv", ""), ("header.csv", "V_1,J_flow,J_diff,J_queue,J_poll\n")] {
        let front = dir.path().join(name);
        fs::write(&front, content).unwrap();
        let out = dir.path().join(format!("out-{name}"));
        let o = run(&["export", "--front", arg(&front), "--coords", "diff-queue", "--out", arg(&out)]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        let text = fs::read_to_string(out.join("export_diff-queue.csv")).unwrap();
        assert_eq!(text.lines().count(), 1, "{text}");
    }
}

#[test]
fn export_missing_column() {
    let dir = tempfile::tempdir().unwrap();
    let front = dir.path().join("front.csv");
    fs::write(&front, "V_1,J_flow,J_diff\n1,2,3\n").unwrap();
    let o = run(&["export", "--front", arg(&front), "--coords", "diff-queue", "--out", arg(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("lacks column J_queue"), "{}", stderr(&o));
}
