use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn hris(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hris"))
        .arg("--out")
        .arg(out)
        .args(args)
        .env_remove("HRIS_OUT")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

#[test]
fn checkfit_defaults_pass() {
    let dir = TempDir::new().unwrap();
    let o = hris(dir.path(), &["checkfit"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("PASS: lambda_g/4 = 4.2668 mm < lambda/8 = 6.8135 mm"));
    assert!(read(dir.path(), "checkfit.txt").contains("PASS"));
    let config: serde_json::Value = serde_json::from_str(&read(dir.path(), "config.json")).unwrap();
    assert_eq!(config["command"]["command"], "checkfit");
    assert_eq!(config["freq_ghz"], 5.5);
}

#[test]
fn checkfit_low_permittivity_fails() {
    let dir = TempDir::new().unwrap();
    let o = hris(dir.path(), &["checkfit", "--eps-disc", "4"]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("FAIL"));
}

#[test]
fn steer_peak_near_target() {
    let dir = TempDir::new().unwrap();
    let o = hris(dir.path(), &["steer", "--theta", "20"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = read(dir.path(), "pattern.csv");
    let mut rows = csv.lines();
    assert_eq!(rows.next(), Some("theta_deg,phi_deg,af_re,af_im,af_db"));
    let (theta, phi, _) = rows
        .map(|l| {
            let c: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
            (c[0], c[1], c[4])
        })
        .fold((0.0, 0.0, f64::NEG_INFINITY), |best, r| if r.2 > best.2 { r } else { best });
    assert!((theta - 20.0).abs() <= 1.0, "argmax at theta {theta}");
    assert!(phi.abs() < 1e-9 || (phi - 360.0).abs() < 1e-9);
    let states: Vec<String> = serde_json::from_str(&read(dir.path(), "load_matrix.json")).unwrap();
    assert_eq!(states.len(), 256);
}

#[test]
fn loop_is_reproducible() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let args = ["--seed", "7", "loop", "--nx", "8", "--ny", "8", "--scenes", "20"];
    assert!(hris(a.path(), &args).status.success());
    assert!(hris(b.path(), &args).status.success());
    let log = read(a.path(), "episode.csv");
    assert_eq!(log.lines().count(), 21);
    assert_eq!(log, read(b.path(), "episode.csv"));
    assert_eq!(read(a.path(), "calibration.json"), read(b.path(), "calibration.json"));
}

#[test]
fn loop_reuses_a_saved_table() {
    let a = TempDir::new().unwrap();
    assert!(hris(a.path(), &["loop", "--nx", "8", "--ny", "8", "--scenes", "3"]).status.success());
    let table = a.path().join("calibration.json");
    let b = TempDir::new().unwrap();
    let o = hris(b.path(), &["loop", "--nx", "8", "--ny", "8", "--scenes", "3", "--table", table.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(read(a.path(), "episode.csv"), read(b.path(), "episode.csv"));

    let c = TempDir::new().unwrap();
    let o = hris(c.path(), &["loop", "--nx", "4", "--ny", "4", "--table", table.to_str().unwrap()]);
    assert!(!o.status.success());
}

#[test]
fn forward_then_retrieve_finds_the_band() {
    let dir = TempDir::new().unwrap();
    assert!(hris(dir.path(), &["forward"]).status.success());
    let input = dir.path().join("slab.s2p");
    let o = hris(dir.path(), &["retrieve", "--input", input.to_str().unwrap(), "--thickness-mm", "0.8"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_str(&read(dir.path(), "dng_bands.json")).unwrap();
    let band = &report["dng_bands"][0];
    assert!(band["start_hz"].as_f64().unwrap() < 5.5e9 && band["stop_hz"].as_f64().unwrap() > 5.5e9);
    assert_eq!(read(dir.path(), "effective_params.csv").lines().count(), 202);
}

#[test]
fn forward_csv_round_trips_through_retrieve() {
    let dir = TempDir::new().unwrap();
    assert!(hris(dir.path(), &["forward", "--format", "csv", "--points", "51"]).status.success());
    let input = dir.path().join("slab.csv");
    let o = hris(dir.path(), &["retrieve", "--input", input.to_str().unwrap(), "--thickness-mm", "0.8"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("DNG band"));
}

#[test]
fn malformed_input_reports_the_line() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("bad.s2p");
    std::fs::write(&input, "# GHz S RI R 50\n1.0 0 0 1 0 1 0 0 0\n2.0 0 0 1 0 x 0 0 0\n").unwrap();
    let o = hris(dir.path(), &["retrieve", "--input", input.to_str().unwrap(), "--thickness-mm", "0.8"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
}

#[test]
fn zero_thickness_fails_before_reading_input() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("does-not-exist.s2p");
    let o = hris(dir.path(), &["retrieve", "--input", missing.to_str().unwrap(), "--thickness-mm", "0"]);
    assert!(!o.status.success());
    let err = stderr(&o);
    assert!(err.contains("thickness"), "{err}");
    assert!(!err.contains("reading"), "{err}");
}

#[test]
fn layout_reports_pitch_deviation() {
    let dir = TempDir::new().unwrap();
    let o = hris(dir.path(), &["layout", "--pitch-mm", "7"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("2.74%"));
    let o = hris(dir.path(), &["layout", "--pitch-mm", "7", "--tolerance", "0.01"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).starts_with("FAIL"));
}

#[test]
fn sense_writes_both_estimates() {
    let dir = TempDir::new().unwrap();
    let o = hris(dir.path(), &["--seed", "3", "sense", "--snr-db", "40"]);
    assert!(o.status.success(), "{}", stderr(&o));
    for (name, theta) in [("doa_g1.json", 25.0), ("doa_g2.json", 40.0)] {
        let v: serde_json::Value = serde_json::from_str(&read(dir.path(), name)).unwrap();
        assert!((v["theta_deg"].as_f64().unwrap() - theta).abs() < 0.5, "{name}: {v}");
    }
    assert!(read(dir.path(), "snapshots_g1.csv").starts_with("element,snapshot,re,im\n"));
}

#[test]
fn output_directory_from_environment() {
    let dir = TempDir::new().unwrap();
    let target = dir.path().join("env-out");
    let o = Command::new(env!("CARGO_BIN_EXE_hris"))
        .arg("checkfit")
        .env("HRIS_OUT", &target)
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(target.join("config.json").exists());
}
