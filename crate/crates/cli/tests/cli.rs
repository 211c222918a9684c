use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mirror_ot_cli::data::{parse_csv, write_csv};
use mirror_ot_core::ObservedSample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/small.csv")
}

fn mirror_ot(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mirror-ot"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json_of(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn sweep_on_fixture() {
    let path = fixture();
    let out = mirror_ot(&["sweep", "--input", path.to_str().unwrap(), "--eta", "0,1,10"]);
    let v = json_of(&out);
    let results = v["results"].as_array().unwrap();
    assert_eq!(results.len(), 3);
    let lower: Vec<f64> = results.iter().map(|r| r["lower"].as_f64().unwrap()).collect();
    assert!(lower.windows(2).all(|w| w[0] <= w[1] + 1e-9), "{lower:?}");
    for r in results {
        assert!(r["lower"].as_f64().unwrap() <= r["upper"].as_f64().unwrap());
        assert!(r.get("lower_penalty").is_some() && r.get("upper_penalty").is_some());
    }
}

#[test]
fn oracle_at_zero() {
    let v = json_of(&mirror_ot(&["oracle", "--beta0", "0.8", "--beta1", "1.6", "--eta", "0"]));
    let row = &v["results"][0];
    assert!((row["v_ip"].as_f64().unwrap() - 0.36744).abs() < 1e-5);
    assert_eq!(row["v_ip"], row["v_u"]);
}

#[test]
fn empty_input_fails_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.csv");
    std::fs::write(&empty, "").unwrap();
    let target = dir.path().join("out.json");
    let out = mirror_ot(&[
        "bounds",
        "--input",
        empty.to_str().unwrap(),
        "--output",
        target.to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing column"));
    assert!(!target.exists());
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
}

#[test]
fn bad_rows_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "w,y1,z1\n0,1,2\n3,1,1\n").unwrap();
    let out = mirror_ot(&["sweep", "--input", bad.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("row 3"));
    let out = mirror_ot(&["sweep", "--input", bad.to_str().unwrap(), "--eta", "1,0"]);
    assert!(!out.status.success());
}

#[test]
fn csv_round_trip_is_exact() {
    let mut r = ChaCha8Rng::seed_from_u64(99);
    let rows: Vec<(u8, Vec<f64>, Vec<f64>)> = (0..100)
        .map(|i| {
            let y = (0..2).map(|_| r.random::<f64>() * 10f64.powi(r.random_range(-8..8)) - 0.5).collect();
            let z = (0..3).map(|_| r.random_range(-1e6..1e6) / 3.0).collect();
            ((i % 2) as u8, y, z)
        })
        .collect();
    let sample = ObservedSample::from_rows(rows).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rt.csv");
    let mut buf = Vec::new();
    write_csv(&sample, &mut buf).unwrap();
    std::fs::write(&path, &buf).unwrap();
    let back = parse_csv(&path).unwrap();
    assert_eq!((back.dy(), back.dz(), back.len()), (2, 3, 100));
    for ((w0, y0, z0), (w1, y1, z1)) in sample.rows().zip(back.rows()) {
        assert_eq!(w0, w1);
        assert!(y0.iter().zip(y1).all(|(a, b)| a.to_bits() == b.to_bits()));
        assert!(z0.iter().zip(z1).all(|(a, b)| a.to_bits() == b.to_bits()));
    }
}

#[test]
fn repeated_runs_are_byte_identical() {
    let path = fixture();
    let args = ["sweep", "--input", path.to_str().unwrap(), "--eta", "0.5:50:4", "--cost", "product"];
    let a = mirror_ot(&args);
    let b = mirror_ot(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let synth = ["synth", "--preset", "quadratic-location", "--sizes", "30", "--seeds", "3"];
    assert_eq!(mirror_ot(&synth).stdout, mirror_ot(&synth).stdout);
}

#[test]
fn output_file_and_formats() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("res.csv");
    let out = mirror_ot(&[
        "sweep",
        "--preset",
        "scale",
        "--n",
        "25",
        "--m",
        "20",
        "--side",
        "upper",
        "--format",
        "csv",
        "--output",
        target.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(&target).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("eta,upper,upper_penalty"));
    assert_eq!(lines.count(), 6);
    let table = mirror_ot(&["corr", "--input", fixture().to_str().unwrap(), "--format", "table"]);
    assert!(table.status.success());
    assert!(String::from_utf8_lossy(&table.stdout).starts_with("      eta  rho_lower"));
}

#[test]
fn quadratic_cost_from_json() {
    let path = fixture();
    let q = r#"quadratic:{"a11":[[1.0]],"a12":[[1.0]],"a22":[[1.0]]}"#;
    let a = json_of(&mirror_ot(&["sweep", "--input", path.to_str().unwrap(), "--eta", "0,2", "--cost", q]));
    let b = json_of(&mirror_ot(&["sweep", "--input", path.to_str().unwrap(), "--eta", "0,2"]));
    for (x, y) in a["results"].as_array().unwrap().iter().zip(b["results"].as_array().unwrap()) {
        let (x, y) = (x["lower"].as_f64().unwrap(), y["lower"].as_f64().unwrap());
        assert!((x - y).abs() < 1e-9, "{x} vs {y}");
    }
}

#[test]
fn neyman_relative_size_starts_at_one() {
    let v = json_of(&mirror_ot(&["neyman", "--input", fixture().to_str().unwrap()]));
    let rows = v["results"].as_array().unwrap();
    assert_eq!(rows[0]["relative_sample_size"].as_f64(), Some(1.0));
    assert!(v["summary"]["s0_sq"].as_f64().unwrap() > 0.0);
}
