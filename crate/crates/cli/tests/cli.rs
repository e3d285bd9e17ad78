use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn calib(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_calib"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn measure_writes_requested_keys() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "d.csv", "v,y\n0.2,0\n0.2,1\n0.7,1\n0.9,1\n");
    let report = dir.path().join("r.json");
    let o = calib(&[
        "measure",
        "--input",
        s(&input),
        "--metrics",
        "ece,smce",
        "--output",
        s(&report),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    let m = r["metrics"].as_object().unwrap();
    assert_eq!(m.len(), 2);
    assert!(r["metrics"]["ece"]["value"].is_number());
    assert!(r["metrics"]["smce"]["value"].is_number());
    assert_eq!(r["n"], 4);
    assert!(r["input_digest"].as_str().unwrap().starts_with("sha256:"));
    assert!(r["tool_version"].is_string());
    assert!(r["metrics"]["ece"]["caveats"].is_array());
}

#[test]
fn measure_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let mut body = String::from("v,y\n");
    for i in 0..200 {
        body.push_str(&format!("{},{}\n", f64::from(i) / 199.0, (i * 7) % 3 % 2));
    }
    let input = write(dir.path(), "d.csv", &body);
    let args = [
        "measure",
        "--input",
        s(&input),
        "--metrics",
        "kce-laplace",
        "--kce-mode",
        "subsample",
        "--kce-terms",
        "100000",
        "--seed",
        "7",
    ];
    let a = calib(&args);
    let b = calib(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let r: Value = serde_json::from_slice(&a.stdout).unwrap();
    let k = &r["metrics"]["kce-laplace"];
    assert!(k["squared"].is_number());
    assert_eq!(k["config"]["terms"], 100000);
    assert_eq!(k["seed"], 7);
}

#[test]
fn measure_all_on_two_points() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "d.csv", "v,y\n0,0\n1,1\n");
    let o = calib(&["measure", "--input", s(&input), "--metrics", "all"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    let m = r["metrics"].as_object().unwrap();
    assert_eq!(m.len(), 8);
    assert_eq!(m["ece"]["value"], 0.0);
    for name in [
        "binned-ece",
        "sintce",
        "smce",
        "ldce",
        "kce-laplace",
        "kce-gaussian",
    ] {
        let v = m[name]["value"].as_f64().unwrap();
        assert!(v <= 0.004, "{name} = {v}");
    }
}

#[test]
fn measure_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.csv", "v,y\n0.1,0\n0.5,x\n");
    let o = calib(&["measure", "--input", s(&bad), "--metrics", "ece"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));

    let o = calib(&["measure", "--input", s(&dir.path().join("missing.csv"))]);
    assert_eq!(o.status.code(), Some(2));

    let good = write(dir.path(), "good.csv", "v,y\n0.1,0\n");
    assert_eq!(
        calib(&["measure", "--input", s(&good), "--metrics", "nope"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        calib(&["measure", "--input", s(&good), "--bins", "0"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        calib(&["measure", "--input", s(&good), "--frobnicate"])
            .status
            .code(),
        Some(1)
    );
    let o = calib(&[
        "measure",
        "--input",
        s(&good),
        "--metrics",
        "kce-gaussian",
        "--kce-mode",
        "fourier",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(calib(&["--help"]).status.code(), Some(0));
}

#[test]
fn generate_dbeta_line_count() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d.csv");
    let o = calib(&[
        "generate",
        "--family",
        "dbeta",
        "--beta",
        "1",
        "--n",
        "10000",
        "--seed",
        "1",
        "--output",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let body = std::fs::read_to_string(&out).unwrap();
    assert_eq!(body.lines().count(), 10001);
    assert!(stdout(&o).contains("dbeta"));
}

#[test]
fn generate_pa_gap_values() {
    let o = calib(&[
        "generate", "--family", "pa-gap", "--alpha", "0.25", "--which", "1", "--n", "1000",
        "--seed", "2",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let body = stdout(&o);
    assert_eq!(body.lines().count(), 1001);
    for line in body.lines().skip(1) {
        let v = line.split(',').next().unwrap();
        assert!(v == "0.25" || v == "0.75", "{line}");
    }
    assert!(!stderr(&o).is_empty());
}

#[test]
fn generate_gauss_gap_range() {
    let o = calib(&[
        "generate",
        "--family",
        "gauss-gap",
        "--eps",
        "0.05",
        "--n",
        "100000",
        "--seed",
        "3",
    ]);
    assert!(o.status.success());
    for line in stdout(&o).lines().skip(1) {
        let v: f64 = line.split(',').next().unwrap().parse().unwrap();
        assert!((0.25..=0.75).contains(&v), "{line}");
    }
}

#[test]
fn generate_other_families_parse_back() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        vec!["--family", "quad-gap", "--alpha", "0.2"],
        vec!["--family", "discontinuity", "--eps", "0.01", "--which", "2"],
        vec!["--family", "f-eps", "--eps", "0.01"],
    ] {
        let out = dir.path().join("g.csv");
        let mut full = vec!["generate", "--n", "50", "--output", s(&out)];
        full.extend(args.iter().copied());
        let o = calib(&full);
        assert!(o.status.success(), "{args:?}: {}", stderr(&o));
        let o = calib(&["measure", "--input", s(&out), "--metrics", "ece"]);
        assert!(o.status.success(), "{args:?}");
    }
}

#[test]
fn generate_errors() {
    assert_eq!(
        calib(&["generate", "--family", "nope"]).status.code(),
        Some(1)
    );
    assert_eq!(
        calib(&["generate", "--family", "dbeta"]).status.code(),
        Some(1)
    );
    assert_eq!(
        calib(&["generate", "--family", "dbeta", "--beta", "-1"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        calib(&["generate", "--family", "pa-gap", "--alpha", "0.25", "--which", "3"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        calib(&["generate", "--family", "quad-gap", "--alpha", "0.3"])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn sweep_row_count_and_determinism() {
    let args = [
        "sweep",
        "--beta-grid",
        "1",
        "--trials",
        "2",
        "--metrics",
        "ece",
        "--n",
        "500",
        "--seed",
        "4",
    ];
    let o = calib(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    let body = stdout(&o);
    let lines: Vec<&str> = body.lines().collect();
    assert_eq!(lines[0], "beta,trial,metric,value");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("1,0,ece,"));
    assert_eq!(calib(&args).stdout, o.stdout);
}

#[test]
fn sweep_bad_grid() {
    let o = calib(&["sweep", "--beta-grid", "a,b", "--trials", "1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--beta-grid"));
    assert_eq!(
        calib(&["sweep", "--beta-grid", "1,-2"]).status.code(),
        Some(1)
    );
}

#[test]
fn reliability_rows() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "d.csv", "v,y\n0.2,0\n0.9,1\n");
    let o = calib(&["reliability", "--input", s(&input), "--bins", "2"]);
    assert!(o.status.success());
    let body = stdout(&o);
    let rows: Vec<&str> = body.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    let total: usize = rows
        .iter()
        .map(|r| r.split(',').nth(2).unwrap().parse::<usize>().unwrap())
        .sum();
    assert_eq!(total, 2);
    assert_eq!(
        calib(&["reliability", "--input", s(&input), "--bins", "0"])
            .status
            .code(),
        Some(1)
    );
    let bad = write(dir.path(), "bad.csv", "v,y\n2,1\n");
    assert_eq!(
        calib(&["reliability", "--input", s(&bad)]).status.code(),
        Some(2)
    );
}

#[test]
fn reliability_on_calibrated_data() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    let o = calib(&[
        "generate",
        "--family",
        "dbeta",
        "--beta",
        "1",
        "--n",
        "10000",
        "--seed",
        "5",
        "--output",
        s(&data),
    ]);
    assert!(o.status.success());
    let o = calib(&["reliability", "--input", s(&data), "--bins", "20"]);
    assert!(o.status.success());
    for row in stdout(&o).lines().skip(1) {
        let f: Vec<&str> = row.split(',').collect();
        let count: usize = f[2].parse().unwrap();
        if count >= 100 {
            let mv: f64 = f[3].parse().unwrap();
            let my: f64 = f[4].parse().unwrap();
            assert!((my - mv).abs() <= 0.05, "{row}");
        }
    }
}
