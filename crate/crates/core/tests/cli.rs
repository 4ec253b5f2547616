use std::fs;
use std::path::Path;
use std::process::Command;

use planar_handeye::cli::{run, EXIT_DATA, EXIT_OK, EXIT_USAGE};
use planar_handeye::io::load_report;

fn exec(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("planar-handeye").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn simulate_then_calibrate_noiseless() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d");
    let report = dir.path().join("r.json");
    let (code, out, _) = exec(&[
        "simulate",
        "--seed",
        "7",
        "--lambda",
        "0",
        "--num-poses",
        "30",
        "--out",
        path(&data),
    ]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("seed: 7"));

    let manifest = data.join("manifest");
    let (code, out, err) = exec(&["calibrate", path(&manifest), "--out", path(&report)]);
    assert_eq!(code, EXIT_OK, "{err}");
    assert!(out.starts_with("config: {"));
    let r = load_report(&report).unwrap();
    for e in r.evaluation.unwrap().per_camera {
        assert!(e.max_translation() <= 1e-3, "{e:?}");
        assert!(e.max_rotation() <= 1e-3, "{e:?}");
    }
}

#[test]
fn missing_dataset_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nowhere/manifest");
    let (code, _, err) = exec(&["calibrate", path(&missing)]);
    assert_eq!(code, EXIT_DATA);
    assert!(err.contains("nowhere"), "{err}");
}

#[test]
fn bad_arguments_are_usage_errors() {
    assert_eq!(exec(&["simulate", "--lambda", "11", "--out", "x"]).0, EXIT_USAGE);
    assert_eq!(exec(&["calibrate"]).0, EXIT_USAGE);
    assert_eq!(
        exec(&["sweep", "--axis", "lambda", "--values", "3:1:1", "--out", "x"]).0,
        EXIT_USAGE
    );
    let (code, out, _) = exec(&["--help"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("calibrate"));
}

#[test]
fn lambda_sweep_writes_one_row_per_trial() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("sweep.csv");
    let args = [
        "sweep",
        "--axis",
        "lambda",
        "--values",
        "0:10:1",
        "--trials",
        "2",
        "--num-poses",
        "12",
        "--out",
        path(&csv),
    ];
    let (code, _, err) = exec(&args);
    assert_eq!(code, EXIT_OK, "{err}");
    let text = fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 1 + 11 * 2);
}

#[test]
fn runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for k in 0..2 {
        let data = dir.path().join(format!("d{k}"));
        let report = dir.path().join(format!("r{k}.json"));
        let csv = dir.path().join(format!("s{k}.csv"));
        let sim = [
            "simulate",
            "--seed",
            "3",
            "--lambda",
            "2",
            "--num-poses",
            "15",
            "--pixel-sigma",
            "0.5",
        ];
        assert_eq!(exec(&[&sim[..], &["--out", path(&data)]].concat()).0, EXIT_OK);
        let (code, stdout, _) = exec(&["calibrate", path(&data), "--joint", "--out", path(&report)]);
        assert_eq!(code, EXIT_OK);
        let sweep = [
            "sweep",
            "--axis",
            "num-images",
            "--values",
            "5,10",
            "--trials",
            "2",
            "--num-poses",
            "15",
        ];
        assert_eq!(exec(&[&sweep[..], &["--out", path(&csv)]].concat()).0, EXIT_OK);
        outputs.push((
            fs::read(data.join("odometry.csv")).unwrap(),
            fs::read(data.join("camera1/poses.csv")).unwrap(),
            fs::read(&report).unwrap(),
            fs::read(&csv).unwrap(),
            stdout.replace(&format!("r{k}.json"), ""),
        ));
    }
    assert!(outputs[0] == outputs[1]);
}

#[test]
fn joint_with_one_camera_falls_back() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d");
    assert_eq!(
        exec(&["simulate", "--cameras", "1", "--num-poses", "15", "--out", path(&data)]).0,
        EXIT_OK
    );
    let (code, out, _) = exec(&["calibrate", path(&data), "--joint"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("notice: no camera pairs"), "{out}");
}

#[test]
fn validate_plane_reports_every_camera() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d");
    let summary = dir.path().join("ground.json");
    assert_eq!(
        exec(&["simulate", "--num-poses", "15", "--out", path(&data)]).0,
        EXIT_OK
    );
    let (code, out, _) = exec(&["validate-plane", path(&data), "--out", path(&summary)]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(out.lines().filter(|l| l.starts_with("camera ")).count(), 3);
    assert!(summary.exists());
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_planar-handeye");
    let status = Command::new(bin)
        .arg("calibrate")
        .arg("/nonexistent/manifest")
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(EXIT_DATA));
    let status = Command::new(bin).arg("frobnicate").output().unwrap();
    assert_eq!(status.status.code(), Some(EXIT_USAGE));
}
