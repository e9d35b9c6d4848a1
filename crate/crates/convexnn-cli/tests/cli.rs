//! End-to-end checks of the `convexnn` binary.

use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_convexnn"))
}

fn workdir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("convexnn-cli-{name}-{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

const CONFIG: &str = r#"{"target":"single-index","d":2,"n_grid":[15,30],"replicates":2,"steps":8,"test_size":300,"seed":5}"#;

#[test]
fn synth_train_predict_round_trip() {
    let dir = workdir("roundtrip");
    let cfg = dir.join("cfg.json");
    fs::write(&cfg, CONFIG).unwrap();
    let data = dir.join("d.csv");
    let model = dir.join("m.json");
    ok(&[
        "synth",
        "--config",
        cfg.to_str().unwrap(),
        "--n",
        "25",
        "--seed",
        "3",
        "--out",
        data.to_str().unwrap(),
    ]);
    assert!(fs::read_to_string(&data).unwrap().starts_with("x1,x2,y\n"));
    ok(&[
        "train",
        "--data",
        data.to_str().unwrap(),
        "--steps",
        "15",
        "--out",
        model.to_str().unwrap(),
    ]);
    let preds = ok(&[
        "predict",
        "--model",
        model.to_str().unwrap(),
        "--data",
        data.to_str().unwrap(),
    ]);
    assert_eq!(preds.lines().count(), 26);
    assert!(preds.starts_with("prediction\n"));
}

#[test]
fn outputs_are_deterministic() {
    let dir = workdir("determinism");
    let cfg = dir.join("cfg.json");
    fs::write(&cfg, CONFIG).unwrap();
    let a = ok(&["experiment", "--config", cfg.to_str().unwrap()]);
    let b = ok(&["experiment", "--config", cfg.to_str().unwrap()]);
    assert_eq!(a, b);
    assert!(a.starts_with("family,n,mean_test_risk,std_error\n"));
    let s1 = ok(&[
        "synth",
        "--config",
        cfg.to_str().unwrap(),
        "--n",
        "10",
        "--seed",
        "9",
    ]);
    let s2 = ok(&[
        "synth",
        "--config",
        cfg.to_str().unwrap(),
        "--n",
        "10",
        "--seed",
        "9",
    ]);
    let s3 = ok(&[
        "synth",
        "--config",
        cfg.to_str().unwrap(),
        "--n",
        "10",
        "--seed",
        "10",
    ]);
    assert_eq!(s1, s2);
    assert_ne!(s1, s3);
}

#[test]
fn exit_codes_follow_error_kinds() {
    let dir = workdir("exit");
    let data = dir.join("d.csv");
    fs::write(
        &data,
        "x1,x2,y\n0.1,0.2,1\n-0.3,0.4,-1\n0.5,-0.1,0.5\n0.2,0.2,-0.2\n",
    )
    .unwrap();
    let d = data.to_str().unwrap();
    assert_eq!(
        run(&["train", "--data", d, "--p", "3"]).status.code(),
        Some(2)
    );
    assert_eq!(
        run(&["train", "--data", "/nonexistent/file.csv"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        run(&["oracle", "--data", d, "--oracle", "exact:1"])
            .status
            .code(),
        Some(3)
    );
    assert_eq!(
        run(&["relax", "--data", d, "--kind", "nd", "--max-iter", "5"])
            .status
            .code(),
        Some(4)
    );
    assert_eq!(run(&["spectrum"]).status.code(), Some(2));
    let bad = dir.join("bad.json");
    fs::write(&bad, "{\"format_version\": 2}").unwrap();
    let out = run(&["predict", "--model", bad.to_str().unwrap(), "--data", d]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unsupported model format version 2"));
}

#[test]
fn numeric_commands_report_known_values() {
    let bound = ok(&[
        "radbound", "--n", "100", "--d", "3", "--p", "2", "--alpha", "1",
    ]);
    let v: serde_json::Value = serde_json::from_str(&bound).unwrap();
    assert!((v["bound"].as_f64().unwrap() - 0.4).abs() < 1e-15);
    let spec = ok(&[
        "spectrum", "--d", "1", "--alpha", "1", "--kmax", "3", "--method", "fourier",
    ]);
    let rows: Vec<&str> = spec.lines().collect();
    assert_eq!(rows[0], "k,lambda,provenance");
    assert!(rows[2].starts_with("1,2.5e-1,"), "{spec}");
    let dir = workdir("geometry");
    let (a, b) = (dir.join("a.json"), dir.join("b.json"));
    fs::write(
        &a,
        r#"{"kind":"zonotope","dim":2,"generators":[[1,0],[0,1]]}"#,
    )
    .unwrap();
    fs::write(&b, r#"{"kind":"zonotope","dim":2,"generators":[[1,1]]}"#).unwrap();
    let h: serde_json::Value = serde_json::from_str(&ok(&[
        "hausdorff",
        "--first",
        a.to_str().unwrap(),
        "--second",
        b.to_str().unwrap(),
    ]))
    .unwrap();
    assert!((h["distance"].as_f64().unwrap() - 0.5f64.sqrt()).abs() < 1e-12);
}
