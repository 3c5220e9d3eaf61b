use std::path::Path;
use std::process::{Command, Output};

use toric_rg::harness::POINT_CSV_HEADER;
use toric_rg::Lattice3D;

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_toric-rg"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn decode_2d_reports_class_and_success() {
    let out = stdout(&cli(&["decode-2d", "--ell", "8", "--p", "0.05", "--seed", "7"]));
    assert!(out.contains("class="), "{out}");
    assert!(out.contains("success="), "{out}");
    let again = stdout(&cli(&["decode-2d", "--ell", "8", "--p", "0.05", "--seed", "7"]));
    assert_eq!(out, again);
}

#[test]
fn decode_2d_writes_the_correction() {
    let dir = tempfile::tempdir().unwrap();
    let corr = dir.path().join("corr.txt");
    let out = stdout(&cli(&[
        "decode-2d",
        "--ell",
        "4",
        "--p",
        "0.1",
        "--noise",
        "depolarizing2d",
        "--output",
        path(&corr),
    ]));
    assert!(out.contains("success="));
    assert!(corr.exists());
}

#[test]
fn decode_3d_reads_a_history_file() {
    let dir = tempfile::tempdir().unwrap();
    let lat = Lattice3D::cube(4).unwrap();
    let mut h = lat.empty_history();
    h.flip(lat.eta_index(1, 2, 0, toric_rg::lattice2d::Dir::H));
    let file = dir.path().join("history.txt");
    std::fs::write(&file, h.to_text(&lat)).unwrap();
    let corr = dir.path().join("corr.txt");
    let out = stdout(&cli(&[
        "decode-3d",
        "--ell",
        "4",
        "--p",
        "0.02",
        "--history",
        path(&file),
        "--output",
        path(&corr),
    ]));
    assert!(out.contains("faults=1 defects=2"), "{out}");
    assert!(out.contains("success=true"), "{out}");
    let back = toric_rg::ErrorHistory::parse(&std::fs::read_to_string(&corr).unwrap(), &lat).unwrap();
    assert_eq!(lat.delta_syndrome(&back).unwrap(), lat.delta_syndrome(&h).unwrap());
}

#[test]
fn bad_configuration_exits_with_two() {
    assert_eq!(cli(&["sweep", "--ell", "6"]).status.code(), Some(2));
    assert_eq!(cli(&["sweep", "--p", "1.5"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("bad.cfg");
    std::fs::write(&file, "colour = blue\n").unwrap();
    assert_eq!(cli(&["--config", path(&file), "sweep"]).status.code(), Some(2));
    let missing = dir.path().join("missing.txt");
    assert_eq!(
        cli(&["decode-3d", "--ell", "4", "--history", path(&missing)]).status.code(),
        Some(2)
    );
}

#[test]
fn dumped_config_reruns_identically() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "sweep", "--ell", "4", "--p", "0.02:0.04:0.02", "--trials", "20", "--seed", "5",
    ];
    let direct = stdout(&cli(&args));
    let mut dump_args = vec!["--dump-config"];
    dump_args.extend_from_slice(&args);
    let dumped = stdout(&cli(&dump_args));
    let file = dir.path().join("run.cfg");
    std::fs::write(&file, &dumped).unwrap();
    let replay = stdout(&cli(&["--config", path(&file), "run"]));
    assert_eq!(direct, replay);
    assert_eq!(stdout(&cli(&["--config", path(&file), "--dump-config", "run"])), dumped);
}

#[test]
fn sweep_writes_csv_trials_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let (csv, trials, json) = (
        dir.path().join("points.csv"),
        dir.path().join("trials.csv"),
        dir.path().join("summary.json"),
    );
    stdout(&cli(&[
        "sweep",
        "--ell",
        "4",
        "--p",
        "0.03",
        "--trials",
        "10",
        "--output",
        path(&csv),
        "--per-trial",
        path(&trials),
        "--json",
        path(&json),
    ]));
    let points = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(points.lines().next(), Some(POINT_CSV_HEADER));
    assert_eq!(points.lines().count(), 2);
    assert_eq!(std::fs::read_to_string(&trials).unwrap().lines().count(), 11);
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(v["points"][0]["trials"], 10);
    assert!(v["anisotropy"]["rates"].is_array());
}

#[test]
fn threshold_reports_an_estimate_or_no_crossing() {
    let out = stdout(&cli(&[
        "threshold",
        "--ell",
        "2,4",
        "--p",
        "0.02:0.10:0.04",
        "--trials",
        "30",
        "--bootstrap",
        "20",
    ]));
    assert_eq!(out.lines().next(), Some(POINT_CSV_HEADER));
    assert!(out.lines().last().unwrap().starts_with("threshold:"), "{out}");
}
