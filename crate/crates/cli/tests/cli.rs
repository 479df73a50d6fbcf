use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use sha2::{Digest, Sha256};

fn wavefront(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wavefront"))
        .args(args)
        .env("WAVEFRONT_THREADS", "2")
        .output()
        .unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn read_manifest(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn recomputed_hash(manifest: &Value) -> String {
    hex::encode(Sha256::digest(
        serde_json::to_vec(&manifest["config"]).unwrap(),
    ))
}

fn table_value(text: &str, row: &str, column: usize) -> f64 {
    let line = text.lines().find(|l| l.starts_with(row)).unwrap();
    line.split_whitespace()
        .nth(column)
        .unwrap()
        .parse()
        .unwrap()
}

#[test]
fn boundaries_of_a_256_element_ula() {
    let out = wavefront(&[
        "boundaries",
        "--array",
        "ula",
        "--n",
        "256",
        "--lambda",
        "0.01",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert_eq!(table_value(&text, "fraunhofer", 1), 325.125);
    assert!((table_value(&text, "fresnel", 1) - 14.40).abs() < 5e-3);
    assert_eq!(table_value(&text, "radius", 2), 63.75);
}

#[test]
fn boundaries_of_a_64_element_ula() {
    let out = wavefront(&[
        "boundaries",
        "--array",
        "ula",
        "--n",
        "64",
        "--lambda",
        "0.01",
    ]);
    assert!(out.status.success());
    assert!((table_value(&stdout(&out), "fraunhofer", 1) - 19.845).abs() < 1e-9);
}

#[test]
fn boundaries_of_a_planar_array_and_a_position_file() {
    let out = wavefront(&[
        "boundaries",
        "--array",
        "upa",
        "--nx",
        "16",
        "--ny",
        "16",
        "--lambda",
        "0.01",
    ]);
    assert!(out.status.success());
    let r = 7.5 * 0.005 * 2f64.sqrt();
    assert!((table_value(&stdout(&out), "radius", 1) - r).abs() < 1e-6);

    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("array.csv");
    fs::write(&csv, "x,y,z\n-0.5,0,0\n0.5,0,0\n").unwrap();
    let out = wavefront(&[
        "boundaries",
        "--array",
        "file",
        "--positions",
        csv.to_str().unwrap(),
        "--lambda",
        "1",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(table_value(&stdout(&out), "fraunhofer", 1), 2.0);
}

#[test]
fn invalid_arguments_exit_with_usage_status() {
    let cases: &[&[&str]] = &[
        &["boundaries", "--array", "ula", "--n", "8", "--lambda", "-1"],
        &["boundaries", "--array", "ula", "--n", "8", "--lambda", "0"],
        &["boundaries", "--array", "ula", "--lambda", "0.01"],
        &[
            "boundaries",
            "--array",
            "upa",
            "--nx",
            "4",
            "--lambda",
            "0.01",
        ],
        &["bench", "--preset", "icassp-fig2"],
        &["bench", "--seed", "1"],
        &[
            "bench",
            "--preset",
            "icassp-fig2",
            "--seed",
            "1",
            "--p",
            "0-3",
        ],
        &["bench", "--preset", "nope", "--seed", "1"],
        &[
            "bench",
            "--config",
            "/nonexistent/scenario.toml",
            "--seed",
            "1",
        ],
        &[
            "estimate",
            "--preset",
            "icassp-fig2",
            "--seed",
            "1",
            "--model",
            "pwm",
            "--strategy",
            "joint",
            "--paths",
            "2",
        ],
        &[
            "validity-sweep",
            "--array",
            "ula",
            "--n",
            "8",
            "--lambda",
            "0.01",
            "--min-wavelengths",
            "10",
            "--max-wavelengths",
            "5",
        ],
    ];
    for args in cases {
        let out = wavefront(args);
        assert_eq!(
            out.status.code(),
            Some(2),
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
}

#[test]
fn malformed_config_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    fs::write(&path, "d_los = 20.0\nunknown_key = 3\n").unwrap();
    let out = wavefront(&[
        "bench",
        "--config",
        path.to_str().unwrap(),
        "--seed",
        "1",
        "--trials",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(2));
    fs::write(&path, "d_los = -1.0\n").unwrap();
    let out = wavefront(&[
        "bench",
        "--config",
        path.to_str().unwrap(),
        "--seed",
        "1",
        "--trials",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn validity_sweep_is_deterministic_and_writes_a_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let mut bytes = Vec::new();
    for (i, threads) in ["1", "3"].into_iter().enumerate() {
        let csv = dir.path().join(format!("sweep{i}.csv"));
        let out = wavefront(&[
            "validity-sweep",
            "--array",
            "ula",
            "--n",
            "16",
            "--lambda",
            "0.01",
            "--points",
            "12",
            "--threads",
            threads,
            "-o",
            csv.to_str().unwrap(),
        ]);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        bytes.push(fs::read(&csv).unwrap());

        let manifest = read_manifest(&dir.path().join(format!("sweep{i}.manifest.json")));
        assert_eq!(
            manifest["config_hash"].as_str().unwrap(),
            recomputed_hash(&manifest)
        );
        assert_eq!(
            manifest["outputs"][0].as_str().unwrap(),
            csv.to_str().unwrap()
        );
        assert!(manifest["seed"].is_null());
        assert!(manifest["command_line"].as_array().unwrap().len() > 5);
    }
    assert_eq!(bytes[0], bytes[1]);

    let text = String::from_utf8(bytes.pop().unwrap()).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("distance_m,distance_over_lambda,model,rmae")
    );
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 24);
    for pair in rows.chunks(2) {
        assert_eq!((pair[0][2], pair[1][2]), ("pwm", "parwm"));
        let (pwm, par): (f64, f64) = (pair[0][3].parse().unwrap(), pair[1][3].parse().unwrap());
        assert!(par <= pwm + 1e-9);
    }
}

#[test]
fn bench_smoke_run_with_a_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("scenario.toml");
    fs::write(
        &config,
        r#"
wavelength = 0.01
d_los = 5.0
nlos_count = [0, 2]
snr_db = 20.0
directions = 64
distances = 8

[array]
kind = "ula"
antennas = 32
"#,
    )
    .unwrap();
    let csv = dir.path().join("bench.csv");
    let out = wavefront(&[
        "bench",
        "--config",
        config.to_str().unwrap(),
        "--seed",
        "9",
        "--trials",
        "3",
        "--p",
        "1,4",
        "--snr-db",
        "300",
        "-o",
        csv.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "strategy,model,p,trials,mean_rel_err,mean_correlations,seed"
    );
    assert_eq!(lines.len(), 1 + 5 * 2);
    assert!(lines[1].starts_with("pwm,pwm,1,3,"));
    assert!(lines[1..].iter().all(|l| l.ends_with(",9")));

    let manifest = read_manifest(&dir.path().join("bench.manifest.json"));
    assert_eq!(manifest["seed"], 9);
    assert_eq!(manifest["config"]["scenario"]["snr_db"], 300.0);
    assert_eq!(manifest["config"]["scenario"]["directions"], 64);
    assert_eq!(
        manifest["config_hash"].as_str().unwrap(),
        recomputed_hash(&manifest)
    );
}

#[test]
fn estimate_prints_the_result_as_json() {
    let out = wavefront(&[
        "estimate",
        "--preset",
        "icassp-fig2",
        "--seed",
        "4",
        "--model",
        "swm",
        "--strategy",
        "seq",
        "--paths",
        "3",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v: Value = serde_json::from_str(&stdout(&out)).unwrap();
    for key in [
        "selected",
        "alpha",
        "relative_error",
        "residual_norms",
        "correlation_count",
    ] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert_eq!(v["selected"].as_array().unwrap().len(), 3);
    assert_eq!(v["residual_norms"].as_array().unwrap().len(), 4);
    assert_eq!(v["correlation_count"], 3 * (300 + 20));
    assert_eq!(v["strategy"], "seq");
    assert_eq!(v["model"], "swm");
    let err = v["relative_error"].as_f64().unwrap();
    assert!((0.0..1.0).contains(&err));

    let again = wavefront(&[
        "estimate",
        "--preset",
        "icassp-fig2",
        "--seed",
        "4",
        "--model",
        "swm",
        "--strategy",
        "seq",
        "--paths",
        "3",
    ]);
    assert_eq!(out.stdout, again.stdout);
}
