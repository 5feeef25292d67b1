use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn sdi(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sdi"))
        .args(args)
        .current_dir(cwd)
        .env_remove("SDI_WORKERS")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap_or(-1)
}

fn data_lines(text: &str) -> Vec<&str> {
    text.lines().filter(|l| !l.starts_with('#')).collect()
}

#[test]
fn pendulum_field_files() {
    let dir = tempfile::tempdir().unwrap();
    let o = sdi(&["field", "--preset", "pendulum", "--grid", "4x3", "--out", "f", "--pgm", "ftle"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("f/field.csv")).unwrap();
    assert!(csv.contains("# parameter_box: [2.25, 2.75]\n"));
    assert!(csv.contains("# tf: 10\n"));
    let rows = data_lines(&csv);
    assert_eq!(rows.len(), 13);
    assert!(rows[0].starts_with("ix,iy,u,v,ftle,sftle1_mean,sftle1_var,sftle1_skew,sftle2_0,"));
    assert!(rows[0].ends_with(",alpha,alpha_x,alpha_vx,expectation,status"));

    let pgm = fs::read(dir.path().join("f/field.pgm")).unwrap();
    assert!(pgm.starts_with(b"P5\n4 3\n255\n"));
    assert_eq!(pgm.len(), b"P5\n4 3\n255\n".len() + 12);

    let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("f/field.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["seed"], 0);
    assert!(meta["timestamp_unix"].as_u64().unwrap() > 0);
    assert_eq!(meta["config"]["indicators"]["tf"], 10.0);
}

#[test]
fn case2_header_echo() {
    let dir = tempfile::tempdir().unwrap();
    let o = sdi(&["field", "--preset", "cr3bp_case2", "--grid", "3x3", "--indicator", "ftle", "--out", "c2"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("c2/field.csv")).unwrap();
    assert!(csv.contains("# parameter_box: [0.099, 0.101]\n"));
    assert!(csv.contains("# tf: 2.8\n"));
}

#[test]
fn field_file_reproduces_itself_across_workers() {
    let dir = tempfile::tempdir().unwrap();
    let o = sdi(&["field", "--preset", "pendulum", "--grid", "5x5", "--degree", "2", "--quad-n", "4", "--seed", "11", "--out", "a"], dir.path());
    assert_eq!(code(&o), 0);
    let o = sdi(&["field", "--config", "a/field.csv", "--workers", "4", "--out", "b"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let a = fs::read(dir.path().join("a/field.csv")).unwrap();
    let b = fs::read(dir.path().join("b/field.csv")).unwrap();
    assert_eq!(a, b);

    let o = Command::new(env!("CARGO_BIN_EXE_sdi"))
        .args(["field", "--config", "a/field.csv", "--out", "c"])
        .env("SDI_WORKERS", "3")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    let meta = fs::read_to_string(dir.path().join("c/field.meta.json")).unwrap();
    assert!(meta.contains("\"workers\": 3"));
    assert_eq!(fs::read(dir.path().join("c/field.csv")).unwrap(), a);
}

#[test]
fn ic_uncertainty_field() {
    let dir = tempfile::tempdir().unwrap();
    let o = sdi(&["field", "--preset", "pendulum", "--grid", "3x3", "--indicator", "ftle,alpha", "--ic-uncertainty", "1e-5", "--out", "ic"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("ic/field.csv")).unwrap();
    assert!(csv.contains("# initial_state_edge: 0.00001"));
    assert!(csv.contains("# degree: 1\n"));
    assert_eq!(data_lines(&csv)[0], "ix,iy,u,v,ftle,alpha,alpha_x,alpha_vx,status");
}

#[test]
fn regions_threshold_and_band() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&sdi(&["field", "--preset", "er3bp", "--grid", "10x10", "--out", "er"], dir.path())), 0);

    let o = sdi(&["regions", "er/field.csv", "--below", "0.01", "--out", "low"], dir.path());
    assert_eq!(code(&o), 0);
    let low: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("low/components.json")).unwrap()).unwrap();
    assert!(low["masked_cells"].as_u64().unwrap() > 0);

    let o = sdi(&["regions", "er/field.csv", "--band", "0.4", "0.6", "--out", "band"], dir.path());
    assert_eq!(code(&o), 0);
    let mask = |d: &str| -> Vec<bool> {
        let text = fs::read_to_string(dir.path().join(d).join("mask.csv")).unwrap();
        data_lines(&text)[1..].iter().map(|l| l.split(',').nth(4) == Some("1")).collect()
    };
    let (a, b) = (mask("low"), mask("band"));
    assert_eq!(a.len(), 100);
    assert!(a.iter().zip(&b).all(|(x, y)| !(x & y)));

    let o = sdi(&["regions", "er/field.csv", "--below", "-1", "--out", "none"], dir.path());
    assert_eq!(code(&o), 0);
    let none: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("none/components.json")).unwrap()).unwrap();
    assert_eq!(none["masked_cells"], 0);
    assert_eq!(none["components"].as_array().unwrap().len(), 0);
}

#[test]
fn malformed_field_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.csv"), "# x: y\nix,iy,u,v,alpha,status\n0,0,0,0,0.5,ok\n1,0,0,0,oops,ok\n").unwrap();
    let o = sdi(&["regions", "bad.csv", "--below", "1"], dir.path());
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 4"));
}

#[test]
fn ensemble_bundles() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["ensemble", "--preset", "pendulum", "--z0", "1.67337,1.19095", "--n", "10"];
    let run = |out: &str, extra: &[&str]| {
        let mut v: Vec<&str> = args.to_vec();
        v.extend(extra);
        v.extend(["--out", out]);
        let o = sdi(&v, dir.path());
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        fs::read_to_string(dir.path().join(out).join("ensemble.csv")).unwrap()
    };
    let a = run("a", &[]);
    let b = run("b", &["--workers", "4"]);
    assert_eq!(a, b);
    let spread: f64 = a.lines().find_map(|l| l.strip_prefix("# terminal_spread: ")).unwrap().parse().unwrap();
    assert!(spread > 1.0, "{spread}");
    assert_eq!(data_lines(&a)[0], "realization_id,t,x,vx,status");
    let ids: std::collections::BTreeSet<&str> = data_lines(&a)[1..].iter().map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(ids.len(), 10);

    let o = sdi(&["ensemble", "--preset", "pendulum", "--z0", "0.5,0", "--n", "1", "--out", "one"], dir.path());
    assert_eq!(code(&o), 0);
    let one = fs::read_to_string(dir.path().join("one/ensemble.csv")).unwrap();
    assert!(data_lines(&one)[1..].iter().all(|l| l.starts_with("0,")));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&sdi(&["field"], dir.path())), 1);
    assert_eq!(code(&sdi(&["field", "--preset", "pendulum", "--grid", "4by4"], dir.path())), 1);
    assert_eq!(code(&sdi(&["field", "--preset", "pendulum", "--tf", "1.0"], dir.path())), 1);
    assert_eq!(code(&sdi(&["field", "--preset", "pendulum", "--indicator", "lyap"], dir.path())), 1);
    assert_eq!(code(&sdi(&["ensemble", "--preset", "pendulum", "--z0", "1,2,3"], dir.path())), 1);
    fs::write(dir.path().join("blocker"), "").unwrap();
    let o = sdi(&["field", "--preset", "pendulum", "--grid", "2x2", "--out", "blocker/sub"], dir.path());
    assert_eq!(code(&o), 2);
    assert_eq!(code(&sdi(&["--help"], dir.path())), 0);
}

#[test]
fn verify_passes_and_catches_injected_fault() {
    let dir = tempfile::tempdir().unwrap();
    let o = sdi(&["verify", "--quick", "--out", "report.json"], dir.path());
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(code(&o), 0, "{report:#}");
    assert_eq!(report["passed"], true);
    let spearman = report["checks"].as_array().unwrap().iter().find(|c| c["name"] == "ftle_alpha_spearman").unwrap();
    assert!(spearman["measured"].as_f64().unwrap() >= 0.8);
    assert!(dir.path().join("report.json").exists());

    let o = sdi(&["verify", "--quick", "--inject-fault"], dir.path());
    assert_eq!(code(&o), 3);
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let failed: Vec<&str> = report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["passed"] == false)
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    assert_eq!(failed, ["variance_oracle"]);
}
