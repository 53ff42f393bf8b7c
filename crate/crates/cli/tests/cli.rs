use std::path::Path;
use std::process::{Command, Output};

use snsm::harness::ShapeManifest;
use snsm::optim::{state_size_for, Preset};

fn snsm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_snsm"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn manifest_path() -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../data/llama_60m.manifest")
        .display()
        .to_string()
}

#[test]
fn rates_reports_tabulated_exponent() {
    let o = snsm(&["rates", "--beta", "0.5"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = header
        .iter()
        .position(|h| *h == "subset_norm_slow")
        .unwrap();
    assert_eq!(row[col], "1.2");
}

#[test]
fn mem_matches_summation_oracle() {
    let o = snsm(&["mem", "--manifest", &manifest_path(), "--preset", "AdamSN"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let total: usize = text
        .lines()
        .last()
        .unwrap()
        .rsplit(',')
        .next()
        .unwrap()
        .parse()
        .unwrap();

    // Independent oracle straight from the manifest text.
    let raw = std::fs::read_to_string(manifest_path()).unwrap();
    let mut expected = 0usize;
    for line in raw
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
    {
        let f: Vec<&str> = line.split('\t').collect();
        let dims: Vec<usize> = f[2].split('x').map(|d| d.parse().unwrap()).collect();
        let (m, n) = (dims[0], *dims.get(1).unwrap_or(&1));
        expected += if f[1] == "linear" {
            m * n + m.max(n)
        } else {
            2 * m * n
        };
    }
    assert_eq!(total, expected);

    let manifest = ShapeManifest::read(Path::new(&manifest_path())).unwrap();
    assert_eq!(
        total,
        state_size_for(&Preset::AdamSN.spec(), &manifest.params)
            .unwrap()
            .total
    );
}

#[test]
fn mem_json_has_frame_column_apart() {
    let o = snsm(&[
        "mem",
        "--manifest",
        &manifest_path(),
        "--preset",
        "AdamSNSM",
        "--rank",
        "64",
        "--format",
        "json",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["frame"].as_u64().unwrap() > 0);
    assert_eq!(
        v["total"].as_u64().unwrap(),
        v["momentum"].as_u64().unwrap() + v["second_moment"].as_u64().unwrap()
    );
}

fn write_config(dir: &Path, lr: f64) -> String {
    let path = dir.join("run.json");
    let cfg = format!(
        r#"{{
            "objective": {{"kind": "quadratic", "dim": 8}},
            "noise": {{"pattern": {{"type": "dense", "sigma": [0.1, 0.1, 0.1, 0.1, 0, 0, 0, 0]}}, "distribution": "gaussian"}},
            "optimizer": {{"preset": "SGD", "overrides": {{"lr": {lr}}}}},
            "steps": 20,
            "seeds": [1, 2]
        }}"#
    );
    std::fs::write(&path, cfg).unwrap();
    path.display().to_string()
}

#[test]
fn train_streams_reproducible_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), 0.1);
    let a = snsm(&["train", &cfg]);
    let b = snsm(&["train", &cfg]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    assert!(text.starts_with("step,seed,loss,grad_norm_sq,lr,state_elems\n"));
    assert_eq!(text.lines().count(), 41);

    let shifted = stdout(&snsm(&["--seed-base", "100", "train", &cfg]));
    assert!(shifted.lines().nth(1).unwrap().starts_with("1,101,"));

    let out = dir.path().join("records.json");
    let o = snsm(&[
        "train",
        &cfg,
        "--format",
        "json",
        "--output",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(v["records"].as_array().unwrap().len(), 40);
}

#[test]
fn divergence_exits_with_numeric_status() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), 50.0);
    assert_eq!(snsm(&["train", &cfg]).status.code(), Some(2));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(snsm(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(snsm(&["rates", "--beta", "1.5"]).status.code(), Some(1));
    assert_eq!(
        snsm(&[
            "mem",
            "--manifest",
            &manifest_path(),
            "--preset",
            "NotAPreset"
        ])
        .status
        .code(),
        Some(1)
    );
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.manifest");
    std::fs::write(&bad, "w\tlinear\t4y3\n").unwrap();
    let o = snsm(&[
        "mem",
        "--manifest",
        bad.to_str().unwrap(),
        "--preset",
        "Adam",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 1"));
}

#[test]
fn bound_breakdown_and_verification() {
    let o = snsm(&["bound", "--thm", "2", "--delta", "0.1", "--format", "json"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let sum = v["deterministic_term"].as_f64().unwrap()
        + v["noise_term"].as_f64().unwrap()
        + v["tail_term"].as_f64().unwrap();
    assert!((sum - v["bound"].as_f64().unwrap()).abs() < 1e-15);

    let o = snsm(&[
        "bound", "--thm", "2", "--verify", "--dim", "20", "--steps", "500", "--seeds", "4",
        "--rank", "4",
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert!(stdout(&o).lines().nth(1).unwrap().ends_with(",true"));

    let o = snsm(&[
        "bound",
        "--thm",
        "3",
        "--subset-sigma",
        "1,0.5",
        "--b0",
        "1,2,3",
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn reversed_sweep_ordering_exits_three() {
    // With a tiny shared step size, norm-scaled steps barely move in 300
    // iterations, so the expected ordering is reversed.
    let args = [
        "sweep", "--dim", "16", "--betas", "0", "--steps", "300", "--seeds", "5", "--lr", "0.01",
        "--check",
    ];
    assert_eq!(snsm(&args).status.code(), Some(3));
    let ok = [
        "sweep", "--dim", "16", "--betas", "0,1", "--sizes", "4", "--steps", "300", "--seeds", "5",
        "--lr", "2", "--check",
    ];
    assert_eq!(snsm(&ok).status.code(), Some(0));
}
