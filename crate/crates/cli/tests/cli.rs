use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn confrank(args: &[&str], extra: &[&Path]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_confrank"));
    cmd.args(args);
    for p in extra {
        cmd.arg(p);
    }
    cmd.output().expect("binary runs")
}

fn synth(dir: &Path, name: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    let out = Command::new(env!("CARGO_BIN_EXE_confrank"))
        .args([
            "synth",
            "--binary",
            "6",
            "--interactions",
            "sparse",
            "--seed",
            "3",
            "--out",
        ])
        .arg(&path)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    path
}

#[test]
fn synth_writes_full_table() {
    let dir = tempfile::tempdir().unwrap();
    let path = synth(dir.path(), "s.csv");
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("b0,b1,b2,b3,b4,b5,performance"));
    assert_eq!(lines.count(), 64);
}

#[test]
fn run_writes_all_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), "s.csv");
    let out = dir.path().join("out");
    let res = confrank(
        &[
            "run",
            "--repeats",
            "3",
            "--approaches",
            "progressive,rank-based,projective",
            "--seed",
            "1",
            "--data",
        ],
        &[&data],
    );
    // --out is required
    assert_eq!(res.status.code(), Some(1));
    let res = Command::new(env!("CARGO_BIN_EXE_confrank"))
        .args(["run", "--repeats", "3", "--seed", "1", "--data"])
        .arg(&data)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    for f in ["report.json", "summary.csv", "sk_tables.txt", "traces.csv"] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    let projective = summary.lines().find(|l| l.starts_with("s,projective,")).unwrap();
    assert_eq!(projective.split(',').nth(8), Some("100"));
}

#[test]
fn sweep_writes_one_row_per_lives_value() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), "s.csv");
    let out = dir.path().join("sweep");
    let res = Command::new(env!("CARGO_BIN_EXE_confrank"))
        .args(["sweep-lives", "--lives", "2,10", "--repeats", "5", "--data"])
        .arg(&data)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
    let rows: Vec<Vec<f64>> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').skip(1).map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[1][1] >= rows[0][1], "lives 10 measured less than lives 2");
}

#[test]
fn exit_codes_distinguish_config_and_dataset_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "a,perf\n0,1\n1,abc\n").unwrap();
    let missing = dir.path().join("missing.csv");
    let good = synth(dir.path(), "g.csv");

    let run = |extra: &[&str], data: &Path| {
        Command::new(env!("CARGO_BIN_EXE_confrank"))
            .arg("run")
            .args(extra)
            .arg("--data")
            .arg(data)
            .arg("--out")
            .arg(&out)
            .output()
            .unwrap()
            .status
            .code()
    };
    assert_eq!(run(&[], &bad), Some(2));
    assert_eq!(run(&[], &missing), Some(2));
    assert_eq!(run(&["--split", "0.5,0.6,0.1"], &good), Some(1));
    assert_eq!(run(&["--approaches", "greedy"], &good), Some(1));
    assert_eq!(run(&["--lives", "0"], &good), Some(1));
    assert_eq!(run(&["--repeats", "2"], &good), Some(0));
    assert_eq!(
        confrank(&["synth", "--interactions", "all", "--out", "x.csv"], &[])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn numeric_features_skip_projective() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("n.csv");
    let mut text = String::from("x,y,perf\n");
    for i in 0..30 {
        text.push_str(&format!("{},{},{}\n", i % 5, i / 5, 10 + (i * 7) % 13));
    }
    fs::write(&data, text).unwrap();
    let out = dir.path().join("o");
    let res = Command::new(env!("CARGO_BIN_EXE_confrank"))
        .args(["run", "--repeats", "2", "--data"])
        .arg(&data)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    let line = summary.lines().find(|l| l.starts_with("n,projective,")).unwrap();
    assert!(line.starts_with("n,projective,0,2,"), "{line}");
}
