use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_momentshape"))
}

fn run(args: &[&str], dir: &Path) -> Output {
    bin()
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) {
    fs::write(dir.join(name), text).unwrap();
}

#[test]
fn selftest_output_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = run(&["selftest", "--grid-n", "256"], dir.path());
    let b = run(&["selftest", "--grid-n", "256"], dir.path());
    let c = bin()
        .args(["selftest", "--grid-n", "256"])
        .env("MOMENTSHAPE_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(a.stdout, c.stdout);
    assert!(String::from_utf8(a.stdout).unwrap().contains("0 failed"));
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["frobnicate"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    let out = run(&["moments", "--nope"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bad_thread_count_is_a_usage_error() {
    let out = bin()
        .arg("selftest")
        .env("MOMENTSHAPE_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn disk_pipeline_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    write(
        p,
        "disk.json",
        r#"{"type":"disk","center":[0.2,0.1],"radius":0.5}"#,
    );
    assert!(run(
        &[
            "moments",
            "--spec",
            "disk.json",
            "--d",
            "3",
            "--out",
            "s.json"
        ],
        p
    )
    .status
    .success());
    let s: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(p.join("s.json")).unwrap()).unwrap();
    assert_eq!(s["d"], 3);
    assert_eq!(s["provenance"], "closed-form");
    assert!(
        run(&["exptransform", "--input", "s.json", "--out", "b.json"], p)
            .status
            .success()
    );
    let b: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(p.join("b.json")).unwrap()).unwrap();
    let b00 = b["b"][0][0][0].as_f64().unwrap();
    assert!((b00 - 0.25).abs() < 1e-12);

    let out = run(
        &[
            "reconstruct",
            "--input",
            "b.json",
            "--boundary-csv",
            "edge.csv",
            "--out",
            "rep.json",
        ],
        p,
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let rep: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(p.join("rep.json")).unwrap()).unwrap();
    assert_eq!(rep["d"], 1);
    let node = &rep["quadrature"]["nodes"][0];
    assert!((node[0].as_f64().unwrap() - 0.2).abs() < 1e-10);
    assert!((node[1].as_f64().unwrap() - 0.1).abs() < 1e-10);
    let edge = fs::read_to_string(p.join("edge.csv")).unwrap();
    assert!(edge.starts_with("x,y\n"));
    assert!(edge.lines().count() > 100);

    // b → s goes back to the moments.
    assert!(run(
        &["exptransform", "--input", "b.json", "--out", "s2.json"],
        p
    )
    .status
    .success());
    let s2: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(p.join("s2.json")).unwrap()).unwrap();
    let (x, y) = (
        s["s"][2][1][0].as_f64().unwrap(),
        s2["s"][2][1][0].as_f64().unwrap(),
    );
    assert!((x - y).abs() < 1e-12);

    // No temporary files are left behind.
    let names: Vec<String> = fs::read_dir(p)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    assert!(
        names
            .iter()
            .all(|n| n.ends_with(".json") || n.ends_with(".csv")),
        "{names:?}"
    );
}

#[test]
fn lowest_mode_and_degree_cap() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    write(
        p,
        "phi.json",
        r#"{"type":"conformal","phi":[[0,0],[1,0],[0.3,0]]}"#,
    );
    assert!(run(
        &["moments", "--spec", "phi.json", "--d", "4", "--out", "s.json"],
        p
    )
    .status
    .success());
    let out = run(&["reconstruct", "--input", "s.json", "--mode", "lowest"], p);
    assert!(out.status.success());
    let rep: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(rep["d"], 2);
    assert_eq!(rep["quadrature"]["multiplicities"][0], 2);
    let out = run(
        &["reconstruct", "--input", "s.json", "--max-degree", "1"],
        p,
    );
    let rep: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(rep["minimal"], false);
}

#[test]
fn malformed_json_reports_position() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "bad.json",
        "{\n  \"type\": \"disk\",\n  \"center\": [0, 0\n}",
    );
    let out = run(&["moments", "--spec", "bad.json"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line"));
    let out = run(&["moments", "--spec", "missing.json"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn non_hermitian_moments_fail_validation() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "s.json",
        r#"{"d":1,"s":[[[1,0],[0.5,0]],[[0,0],[1,0]]],"provenance":"closed-form"}"#,
    );
    let out = run(&["exptransform", "--input", "s.json"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn markov_recovers_intervals() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "iv.json",
        r#"{"intervals":[[-1,-0.5],[0.5,1]]}"#,
    );
    let out = run(&["markov1d", "--input", "iv.json"], dir.path());
    assert!(out.status.success());
    let rep: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(rep["d_min"], 2);
    let right = rep["intervals"][1][1].as_f64().unwrap();
    assert!((right - 1.0).abs() < 1e-10);
    write(
        dir.path(),
        "s.json",
        r#"{"s":[1,0.5,0.3333333333333333,0.25,0.2]}"#,
    );
    let out = run(&["markov1d", "--input", "s.json"], dir.path());
    let rep: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(rep["d_min"], 1);
}

#[test]
fn volume_csv_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "x.json",
        r#"{"n":2,"terms":[{"alpha":[1,0],"coeff":1.0}]}"#,
    );
    let args = [
        "volume",
        "--poly",
        "x.json",
        "--samples",
        "100000",
        "--delta-grid",
        "0.1,0.01",
    ];
    let a = run(&args, dir.path());
    let b = bin()
        .args(args)
        .current_dir(dir.path())
        .env("MOMENTSHAPE_THREADS", "3")
        .output()
        .unwrap();
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("delta,vol,stderr,ratio"));
    let first: Vec<f64> = lines
        .next()
        .unwrap()
        .split(',')
        .map(|v| v.parse().unwrap())
        .collect();
    assert!((first[3] - 4.0).abs() < 4.0 * first[2] / first[0] + 1e-12);
    let out = run(
        &["volume", "--poly", "x.json", "--delta-grid", "0.5"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn stability_jobs_write_csv_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "cfg.json",
        r#"[
          {"kind":"two_domains","a":{"type":"disk","center":[0,0],"radius":0.4},
           "b":{"type":"disk","center":[0,0],"radius":0.5},"grid_n":128},
          {"kind":"holder","poly":{"n":2,"terms":[{"alpha":[1,1],"coeff":1.0}]},
           "family":"dilation","eps_grid":[0.01,0.001]},
          {"kind":"random_diagonal","pairs":2,"points":10,"grid_n":48}
        ]"#,
    );
    let out = run(
        &["stability", "--config", "cfg.json", "--out-dir", "res"],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let res = dir.path().join("res");
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(res.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary.as_array().unwrap().len(), 3);
    assert!(summary.as_array().unwrap().iter().all(|s| s["ok"] == true));
    assert!((summary[0]["left"].as_f64().unwrap() - 0.09).abs() < 1e-12);
    let holder = fs::read_to_string(res.join("job1_holder.csv")).unwrap();
    assert!(holder.starts_with("eps,l1,gap,ratio,in_ball,method\n"));
    assert_eq!(holder.lines().count(), 3);
    assert!(res.join("job2_random_diagonal.csv").exists());
}

#[test]
fn line_tables_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    write(p, "t.json", r#"{"t":[1,0,0,0]}"#);
    let out = run(&["exptransform", "--input", "t.json"], p);
    assert!(out.status.success());
    let s: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let want = [1.0, 0.5, 1.0 / 3.0, 0.25];
    for (k, w) in want.iter().enumerate() {
        assert!((s["s"][k].as_f64().unwrap() - w).abs() < 1e-15);
    }
    write(p, "bad.json", r#"{"m":2,"t":[1,0,0,0]}"#);
    assert_eq!(
        run(&["exptransform", "--input", "bad.json"], p)
            .status
            .code(),
        Some(2)
    );
}
