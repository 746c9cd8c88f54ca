mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::scenarios_dir;
use serde_json::Value;

fn perchkit(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_perchkit"));
    cmd.args(args).env_remove("PERCHKIT_THREADS");
    if let Some(t) = threads {
        cmd.env("PERCHKIT_THREADS", t);
    }
    cmd.output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = perchkit(args, None);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn scenario(name: &str) -> String {
    scenarios_dir().join(name).to_string_lossy().into_owned()
}

fn read(dir: &Path, file: &str) -> Vec<u8> {
    std::fs::read(dir.join(file)).unwrap_or_else(|e| panic!("{file}: {e}"))
}

fn write_sweep(dir: &Path, grid: &str) -> String {
    let path = dir.join("sweep.toml");
    let base = scenario("perch_90deg_1p5m.toml").replace('\\', "/");
    let text = format!(
        "schema_version = 1\nname = \"probe\"\nkind = \"episode\"\nbase = \"{base}\"\nseeds = 1\n\n[grid]\n{grid}\n"
    );
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn missing_scenario_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().to_string_lossy().into_owned();
    let out = perchkit(&["plan", "--scenario", "no/such/file.toml", "--out", &out_dir], None);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("file not found"));
    assert!(!dir.path().join("summary.json").exists());
}

#[test]
fn plan_meets_the_contact_acceleration() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().to_string_lossy().into_owned();
    ok(&[
        "plan",
        "--scenario",
        &scenario("perch_90deg_1p5m.toml"),
        "--out",
        &out_dir,
    ]);
    let v: Value = serde_json::from_slice(&read(dir.path(), "summary.json")).unwrap();
    assert_eq!(v["kind"], "plan");
    assert_eq!(v["certified"], true);
    let acc: Vec<f64> = v["endpoint_acceleration"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect();
    for (got, want) in acc.iter().zip([4.0, 0.0, -9.81]) {
        assert!((got - want).abs() < 1e-6, "{acc:?}");
    }
}

#[test]
fn plan_output_is_byte_identical_across_runs() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        ok(&[
            "plan",
            "--scenario",
            &scenario("perch_60deg_3p5m.toml"),
            "--out",
            &d.path().to_string_lossy(),
        ]);
    }
    assert_eq!(read(a.path(), "summary.json"), read(b.path(), "summary.json"));
}

#[test]
fn simulate_is_reproducible_and_thread_count_independent() {
    let dirs: Vec<_> = (0..3).map(|_| tempfile::tempdir().unwrap()).collect();
    for (d, threads) in dirs.iter().zip([None, None, Some("1")]) {
        let path = d.path().to_string_lossy().into_owned();
        let out = perchkit(
            &[
                "simulate",
                "--scenario",
                &scenario("noisy_control_90deg_1p5m.toml"),
                "--out",
                &path,
                "--seeds",
                "3",
            ],
            threads,
        );
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let first = read(dirs[0].path(), "metrics.csv");
    assert_eq!(first, read(dirs[1].path(), "metrics.csv"));
    assert_eq!(first, read(dirs[2].path(), "metrics.csv"));
    assert_eq!(
        read(dirs[0].path(), "log_seed_1.csv"),
        read(dirs[2].path(), "log_seed_1.csv")
    );
    assert_eq!(String::from_utf8(first).unwrap().lines().count(), 4);
}

#[test]
fn single_cell_sweep_yields_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let sweep = write_sweep(dir.path(), "mode = [\"avp\"]");
    let out = dir.path().join("out");
    ok(&["ablate", "--sweep", &sweep, "--out", &out.to_string_lossy()]);
    let rows = String::from_utf8(read(&out, "rows.csv")).unwrap();
    assert_eq!(rows.lines().count(), 2, "{rows}");
    let v: Value = serde_json::from_slice(&read(&out, "summary.json")).unwrap();
    assert_eq!(v["kind"], "ablate");
    assert_eq!(v["cells"].as_array().unwrap().len(), 1);
}

#[test]
fn empty_grid_axis_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let sweep = write_sweep(dir.path(), "distance = []");
    let out = perchkit(
        &[
            "ablate",
            "--sweep",
            &sweep,
            "--out",
            &dir.path().join("out").to_string_lossy(),
        ],
        None,
    );
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("empty grid"));
}

#[test]
fn unknown_grid_axis_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let sweep = write_sweep(dir.path(), "speed = [1.0]");
    let out = perchkit(
        &[
            "ablate",
            "--sweep",
            &sweep,
            "--out",
            &dir.path().join("out").to_string_lossy(),
        ],
        None,
    );
    assert!(!out.status.success());
}

#[test]
fn report_renders_a_saved_summary() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().to_string_lossy().into_owned();
    ok(&[
        "plan",
        "--scenario",
        &scenario("time_starved_90deg_1p5m.toml"),
        "--out",
        &path,
    ]);
    let out = ok(&["report", "--out", &path]);
    let md = String::from_utf8(read(dir.path(), "report.md")).unwrap();
    assert!(md.starts_with("# plan"));
    assert_eq!(md, String::from_utf8(out.stdout).unwrap());
    assert!(!perchkit(
        &["report", "--out", &dir.path().join("nothing").to_string_lossy()],
        None
    )
    .status
    .success());
}

#[test]
fn zero_threads_are_rejected() {
    let out = perchkit(
        &[
            "plan",
            "--scenario",
            &scenario("perch_90deg_1p5m.toml"),
            "--out",
            "unused",
        ],
        Some("0"),
    );
    assert!(!out.status.success());
}
