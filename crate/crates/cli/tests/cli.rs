use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use dirichlet_einstein_cli::ResultRecord;

const TORUS: &str = "[space]\ndims = [1, 1, 1]\n\n[boundary]\na = [1.0, 1.0, 1.3]\nb = [2.718281828459045, 0.6, 1.3]\n\n[solver]\nengine = \"torus\"\nintervals = 128\n";

const S1S2_SHOOT: &str = "[space]\ndims = [1, 2]\nbeta = [0.0, 2.0]\n\n[boundary]\na = [1.0, 0.25]\nb = [1.0, 0.25]\n\n[solver]\nengine = \"shooting\"\nlength = 1.0\n";

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_dirichlet-einstein"));
    c.env_remove("DIRICHLET_EINSTEIN_OUTPUT_DIR");
    c
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn torus_solve_then_verify() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("t.toml"), TORUS).unwrap();
    let o = run_in(dir.path(), &["solve", "t.toml", "--output-dir", "out"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("out/t.csv")).unwrap();
    let head = csv.lines().next().unwrap();
    assert!(head.starts_with("# engine=torus lambda="));
    assert!(head.contains(" q=1 ") && head.contains("verdict=pass"));
    assert_eq!(csv.lines().nth(1).unwrap(), "r,f_1,f_2,f_3,df_1,df_2,df_3");
    assert_eq!(csv.lines().count(), 2 + 129);

    let from_csv = ResultRecord::read(&dir.path().join("out/t.csv")).unwrap();
    let from_json = ResultRecord::read(&dir.path().join("out/t.jsonl")).unwrap();
    assert_eq!(from_csv, from_json);
    assert!(from_csv.samples.windows(2).all(|w| w[1].r > w[0].r));

    for file in ["out/t.csv", "out/t.jsonl"] {
        let v = run_in(dir.path(), &["verify", file, "--config", "t.toml"]);
        assert_eq!(code(&v), 0, "{}", String::from_utf8_lossy(&v.stdout));
        assert!(String::from_utf8_lossy(&v.stdout).contains("recomputed Pass"));
    }
}

#[test]
fn verify_detects_tampering() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("t.toml"), TORUS).unwrap();
    assert_eq!(code(&run_in(dir.path(), &["solve", "t.toml", "--format", "csv"])), 0);
    assert!(!dir.path().join("t.jsonl").exists());
    let csv = fs::read_to_string(dir.path().join("t.csv")).unwrap();
    let rec = ResultRecord::read(&dir.path().join("t.csv")).unwrap();
    let wrong = csv.replacen(
        &format!("lambda={}", rec.lambda),
        &format!("lambda={}", rec.lambda + 1e-3),
        1,
    );
    assert_ne!(wrong, csv);
    fs::write(dir.path().join("bad.csv"), wrong).unwrap();
    let v = run_in(dir.path(), &["verify", "bad.csv", "--config", "t.toml"]);
    assert_eq!(code(&v), 1);
}

#[test]
fn identical_configs_give_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("a.toml"), TORUS).unwrap();
    fs::write(dir.path().join("b.toml"), TORUS).unwrap();
    let o = run_in(dir.path(), &["solve", "a.toml", "b.toml", "--jobs", "2"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for ext in ["csv", "jsonl"] {
        let a = fs::read(dir.path().join(format!("a.{ext}"))).unwrap();
        let b = fs::read(dir.path().join(format!("b.{ext}"))).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn output_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("t.toml"), TORUS).unwrap();
    let o = bin()
        .current_dir(dir.path())
        .env("DIRICHLET_EINSTEIN_OUTPUT_DIR", "env_out")
        .args(["solve", "t.toml", "--stem", "x"])
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert!(dir.path().join("env_out/x.csv").exists());
}

#[test]
fn shooting_below_threshold_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("s.toml"), S1S2_SHOOT).unwrap();
    let o = run_in(dir.path(), &["solve", "s.toml"]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    assert!(stderr(&o).contains("no solution at length 1"));
}

#[test]
fn s1s2_single_case_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let below = run_in(dir.path(), &["scan-s1s2", "--f2-bar", "0.25"]);
    assert_eq!(code(&below), 2);
    let above = run_in(dir.path(), &["scan-s1s2", "--f2-bar", "0.5", "--f1-ends", "1,2"]);
    assert_eq!(code(&above), 0, "{}", stderr(&above));
    let rec = ResultRecord::read(&dir.path().join("s1s2.csv")).unwrap();
    assert_eq!(rec.lambda, 4.0);
    assert!(rec.samples.iter().all(|s| s.f[1] == 0.5));
}

#[test]
fn s1s2_scan_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(
        dir.path(),
        &[
            "scan-s1s2",
            "--from",
            "0.1",
            "--to",
            "0.6",
            "--samples",
            "11",
            "--output",
            "scan.csv",
        ],
    );
    assert_eq!(code(&o), 0);
    assert!(stderr(&o).contains("threshold f2_bar* = 0.3183"));
    let text = fs::read_to_string(dir.path().join("scan.csv")).unwrap();
    let rows: Vec<_> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 11);
    for row in rows {
        let cols: Vec<_> = row.split(',').collect();
        let f2: f64 = cols[0].parse().unwrap();
        assert_eq!(cols[2] == "true", f2 > 1.0 / std::f64::consts::PI, "{row}");
    }
}

#[test]
fn config_errors_exit_1_with_context() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("zero.toml"),
        TORUS.replace("a = [1.0, 1.0, 1.3]", "a = [0.0, 1.0, 1.3]"),
    )
    .unwrap();
    let o = run_in(dir.path(), &["solve", "zero.toml"]);
    assert_eq!(code(&o), 1);
    let err = stderr(&o);
    assert!(
        err.contains("boundary coefficients must be positive") && err.contains("line 5"),
        "{err}"
    );

    fs::write(
        dir.path().join("extra.toml"),
        TORUS.replace("intervals = 128", "intervals = 128\nspeed = 2"),
    )
    .unwrap();
    let o = run_in(dir.path(), &["solve", "extra.toml"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("speed"));

    let o = run_in(dir.path(), &["solve", "missing.toml"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn jobs_report_the_worst_code() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("ok.toml"), TORUS).unwrap();
    fs::write(dir.path().join("bad.toml"), "[space]\ndims = [1]\n").unwrap();
    let o = run_in(dir.path(), &["solve", "ok.toml", "bad.toml", "--jobs", "2"]);
    assert_eq!(code(&o), 1);
    assert!(dir.path().join("ok.csv").exists());
}

#[test]
fn trace_m_samples_the_interval() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(
        dir.path(),
        &["trace-m", "--total", "-1.5", "--dim", "3", "--samples", "200"],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("lambda,m"));
    let pts: Vec<(f64, f64)> = lines
        .map(|l| {
            let (a, b) = l.split_once(',').unwrap();
            (a.parse().unwrap(), b.parse().unwrap())
        })
        .collect();
    assert_eq!(pts.len(), 200);
    assert_eq!(pts[0].0, -(1.5f64 * 1.5) / 3.0);
    assert!(pts.last().unwrap().0 < std::f64::consts::PI.powi(2) / 3.0);
    assert!(pts.windows(2).all(|w| w[1].1 >= w[0].1));
}

#[test]
fn solve_torus_inline() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(
        dir.path(),
        &["solve-torus", "--a", "1,2", "--b", "3,1", "--intervals", "64"],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rec = ResultRecord::read(&dir.path().join("torus.jsonl")).unwrap();
    assert_eq!((rec.q, rec.h), (1.0, 1.0));
    assert_eq!(rec.samples.len(), 65);
}

#[test]
fn continuation_engine_on_a_torus() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = TORUS
        .replace("engine = \"torus\"", "engine = \"continuation\"")
        .replace("128", "64");
    fs::write(dir.path().join("c.toml"), cfg).unwrap();
    let o = run_in(dir.path(), &["solve", "c.toml"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let cont = ResultRecord::read(&dir.path().join("c.csv")).unwrap();
    fs::write(dir.path().join("t.toml"), TORUS.replace("128", "64")).unwrap();
    assert_eq!(code(&run_in(dir.path(), &["solve", "t.toml"])), 0);
    let exact = ResultRecord::read(&dir.path().join("t.csv")).unwrap();
    assert_eq!(cont.q, 1.0);
    assert!((cont.lambda - exact.lambda).abs() < 1e-6);
    for (c, e) in cont.samples.iter().zip(&exact.samples) {
        assert!((c.f[0] - e.f[0]).abs() < 1e-6 && (c.f[1] - e.f[1]).abs() < 1e-6);
    }
}
