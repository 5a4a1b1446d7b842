use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn qfock(job: &Path, out: &Path, extra: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qfock"))
        .arg(job)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .expect("spawn qfock")
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines().map(|l| l.split(',').map(str::to_owned).collect()).collect()
}

#[test]
fn kernel_job_writes_closed_and_series_rows() {
    let out = TempDir::new().unwrap();
    let run = qfock(&fixture("kernel.json"), out.path(), &[]);
    assert_eq!(run.status.code(), Some(0), "{}", String::from_utf8_lossy(&run.stderr));
    let table = rows(&read(out.path(), "kernel.csv"));
    assert_eq!(table[0].join(","), "f_name,g_name,c,value_re,value_im,method,tail_bound");
    assert_eq!(table.len(), 1 + 3 * 2 * 2);

    // (1 - 4/16)^{-c/2} on a unit cell
    let value = |c: &str, method: &str| -> f64 {
        table
            .iter()
            .find(|r| r[0] == "half_chi0" && r[1] == "half_chi0" && r[2] == c && r[5] == method)
            .map(|r| r[3].parse().unwrap())
            .unwrap()
    };
    assert!((value("1", "closed") - 1.1547005383792515).abs() <= 1e-15);
    assert!((value("2", "closed") - 4.0 / 3.0).abs() <= 1e-15);
    assert!((value("1", "series") - 1.1547005383792515).abs() <= 1e-12);

    for r in &table[1..] {
        if r[5] == "closed" {
            assert_eq!(r[6], "");
        } else {
            assert!(r[6].parse::<f64>().unwrap() >= 0.0);
        }
    }
}

#[test]
fn certify_rank_one_exits_one_with_witness() {
    let out = TempDir::new().unwrap();
    let run = qfock(&fixture("certify_rank_one.json"), out.path(), &[]);
    assert_eq!(run.status.code(), Some(1));
    let cert: serde_json::Value = serde_json::from_str(&read(out.path(), "certificate.json")).unwrap();
    assert_eq!(cert["verdict"], "NotProjection");
    assert_eq!(cert["theorem_agreement"], true);
    assert_eq!(cert["witness"]["check"], "powers");
    assert_eq!(cert["witness"]["n"], 2);
    let residual = cert["witness"]["residual"].as_f64().unwrap();
    assert!((residual - 0.125).abs() <= 1e-12);
    assert!(out.path().join("certificate.csv").exists());
    assert!(out.path().join("certificate.md").exists());
}

#[test]
fn certify_indicator_exits_zero() {
    let out = TempDir::new().unwrap();
    let run = qfock(&fixture("certify_indicator.json"), out.path(), &[]);
    assert_eq!(run.status.code(), Some(0), "{}", String::from_utf8_lossy(&run.stderr));
    let cert: serde_json::Value = serde_json::from_str(&read(out.path(), "certificate.json")).unwrap();
    assert_eq!(cert["verdict"], "Projection");
    assert!(cert.get("witness").is_none());
}

#[test]
fn reruns_are_byte_identical() {
    for job in ["certify_rank_one.json", "certify_indicator.json", "gram.json", "kernel.json"] {
        let a = TempDir::new().unwrap();
        let b = TempDir::new().unwrap();
        qfock(&fixture(job), a.path(), &[]);
        qfock(&fixture(job), b.path(), &[]);
        let mut names: Vec<_> = fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
        names.sort();
        assert!(!names.is_empty(), "{job}");
        for name in names {
            let name = name.to_str().unwrap();
            assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap(), "{job}/{name}");
        }
    }
}

#[test]
fn thread_count_does_not_change_output() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    qfock(&fixture("certify_rank_one.json"), a.path(), &[]);
    let single = Command::new(env!("CARGO_BIN_EXE_qfock"))
        .arg(fixture("certify_rank_one.json"))
        .arg("--out")
        .arg(b.path())
        .env("QFOCK_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(single.status.code(), Some(1));
    assert_eq!(read(a.path(), "certificate.json"), read(b.path(), "certificate.json"));
}

#[test]
fn seed_override_is_recorded() {
    let out = TempDir::new().unwrap();
    qfock(&fixture("certify_indicator.json"), out.path(), &["--seed", "99"]);
    let cert: serde_json::Value = serde_json::from_str(&read(out.path(), "certificate.json")).unwrap();
    assert_eq!(cert["config"]["seed"], 99);
}

#[test]
fn gram_job_reports_summary() {
    let out = TempDir::new().unwrap();
    let run = qfock(&fixture("gram.json"), out.path(), &[]);
    assert_eq!(run.status.code(), Some(0), "{}", String::from_utf8_lossy(&run.stderr));
    assert_eq!(rows(&read(out.path(), "gram.csv")).len(), 1 + 9);
    assert!(out.path().join("gram_summary.csv").exists());
}

#[test]
fn existence_violation_exits_two_without_output() {
    let out = TempDir::new().unwrap();
    let run = qfock(&fixture("bad_existence.json"), out.path(), &[]);
    assert_eq!(run.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&run.stderr);
    assert!(stderr.contains("kernel(f=\"x\", g=\"y\")"), "{stderr}");
    assert!(stderr.contains("existence condition violated"), "{stderr}");
    assert_eq!(fs::read_dir(out.path()).unwrap().count(), 0);
}

#[test]
fn malformed_job_exits_two() {
    let dir = TempDir::new().unwrap();
    let job = dir.path().join("job.json");
    fs::write(&job, r#"{"command": "kernel", "grid": {"dim": 1, "volumes": [-1.0]}}"#).unwrap();
    let out = dir.path().join("out");
    let run = qfock(&job, &out, &[]);
    assert_eq!(run.status.code(), Some(2));
    assert!(!out.exists());

    let run = qfock(&dir.path().join("missing.json"), &out, &[]);
    assert_eq!(run.status.code(), Some(2));
}
