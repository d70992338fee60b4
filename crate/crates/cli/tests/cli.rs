use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use kernelcomp::io::read_table_rows;
use kernelcomp::oracles::invariance_margin;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kernelcomp"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(code(&run(&["no-such-command"])), 1);
    assert_eq!(code(&run(&["generate-task", "--task", "no_such_task"])), 1);
    assert_eq!(code(&run(&["fit", "--dataset", "/nonexistent.csv", "--salience", "0.3,0.4"])), 1);
}

#[test]
fn verify_oracles_passes() {
    let o = run(&["verify-oracles"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("addition_slope"));
    assert!(!text.contains("FAIL"));
}

#[test]
fn generate_fit_analyze() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("cd3.csv");
    let preds = dir.path().join("preds.csv");
    let o = run(&["generate-task", "--task", "context_dependence", "--param", "variant=CD3", "--out", s(&data)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let o = run(&["fit", "--dataset", s(&data), "--salience", "0.2,0.02,0.34", "--out", s(&preds)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("test accuracy 0"));
    let o = run(&["analyze", "--dataset", s(&data), "--predictions", s(&preds), "--out", s(dir.path())]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    let r2: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("r_squared "))
        .expect("r_squared line")
        .parse()
        .unwrap();
    assert!(r2 > 1.0 - 1e-8);
    assert!(dir.path().join("additivity.csv").exists());
}

#[test]
fn singular_kernel_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("te.csv");
    let o = run(&["generate-task", "--task", "transitive_equivalence", "--out", s(&data)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(code(&run(&["fit", "--dataset", s(&data), "--salience", "0.5,0"])), 2);
}

#[test]
fn depth_salience_full_conjunction_grows() {
    let o = run(&["depth-salience", "--components", "3", "--depth", "32"]);
    assert_eq!(code(&o), 0);
    let (header, rows) = read_table_rows(o.stdout.as_slice()).unwrap();
    assert_eq!(header, ["layer", "S_1", "S_2", "S_3"]);
    assert_eq!(rows.len(), 33);
    let s3: Vec<f64> = rows.iter().map(|r| r[3].parse().unwrap()).collect();
    assert!(s3.windows(2).all(|w| w[1] >= w[0]));
    assert!(s3[32] > s3[0]);
}

#[test]
fn sample_reps_is_seeded() {
    let a = run(&["sample-reps", "--cardinalities", "3,3", "--dim", "8", "--sigma", "0.5,0.7", "--seed", "9"]);
    let b = run(&["sample-reps", "--cardinalities", "3,3", "--dim", "8", "--sigma", "0.5,0.7", "--seed", "9"]);
    let c = run(&["sample-reps", "--cardinalities", "3,3", "--dim", "8", "--sigma", "0.5,0.7", "--seed", "10"]);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn invariance_sweep_matches_margin_formula() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("margins");
    let o = run(&["sweep", "--config", s(&config("margins.toml")), "--out", s(&out), "--no-plots"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = read_table_rows(fs::File::open(out.join("sweep.csv")).unwrap()).unwrap();
    let col = |n: &str| header.iter().position(|h| h == n).unwrap();
    let (task, s1, metric, value) = (col("task"), col("s_1"), col("metric"), col("value"));
    let mut checked = 0;
    for r in rows.iter().filter(|r| r[task] == "invariance" && r[metric] == "min_test_margin") {
        let s1: f64 = r[s1].parse().unwrap();
        let m: f64 = r[value].parse().unwrap();
        assert!((m - invariance_margin(s1).unwrap()).abs() < 1e-9, "S1={s1}: {m}");
        checked += 1;
    }
    assert!(checked >= 20);
    let manifest = fs::read_to_string(out.join("manifest.csv")).unwrap();
    assert!(manifest.lines().any(|l| l.starts_with("sweep.csv,")));

    let again = dir.path().join("again");
    run(&["sweep", "--config", s(&config("margins.toml")), "--out", s(&again), "--no-plots"]);
    assert_eq!(fs::read(out.join("sweep.csv")).unwrap(), fs::read(again.join("sweep.csv")).unwrap());
}

#[test]
fn invalid_config_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "name = \"x\"\nbogus = 1\n[[tasks]]\nname = \"invariance\"\n[geometry]\nkind = \"grid\"\ncomponents = 2\nstep = 0.1\n").unwrap();
    let o = run(&["sweep", "--config", s(&cfg), "--out", s(dir.path())]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("bogus"));
}
