use std::path::Path;
use std::process::{Command, Output};

const HEADER: &str = "experiment,quantity,parameters,value,bound,ratio,passed,seed,wall_time_s";

fn lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_liouville-lab")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn run_to(dir: &Path, file: &str, args: &[&str]) -> Vec<u8> {
    let out = dir.join(file);
    let mut all = args.to_vec();
    let out_s = out.to_str().unwrap();
    all.extend(["--out", out_s]);
    let o = lab(&all);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    std::fs::read(out).unwrap()
}

#[test]
fn csv_header_and_rows() {
    let o = lab(&["squarefree", "--x", "1e5"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(HEADER));
    let row = lines.next().unwrap();
    assert!(row.starts_with("squarefree,Q(x)/x,x=1e5,0.60"), "{row}");
    assert!(row.ends_with(",true,0,"), "{row}");
}

#[test]
fn json_has_csv_fields() {
    let o = lab(&["goldbach", "--param", "n=500", "--format", "json", "--seed", "4"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let rows = v.as_array().unwrap();
    assert_eq!(rows.len(), 2);
    for r in rows {
        let obj = r.as_object().unwrap();
        for key in HEADER.split(',') {
            assert!(obj.contains_key(key), "{key}");
        }
        assert_eq!(obj["seed"], 4);
        assert!(obj["wall_time_s"].is_null());
    }
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        vec!["entropy", "--x", "1e5", "--w", "100", "--h", "6", "--param", "trials=2000", "--seed", "11"],
        vec!["mean-value", "--param", "n=40", "--param", "t=50", "--param", "vectors=2"],
        vec!["chowla-avg", "--x", "2e4", "--h", "20", "--param", "check_x=2000", "--format", "json"],
    ] {
        let a = run_to(dir.path(), "a.out", &args);
        let b = run_to(dir.path(), "b.out", &args);
        assert!(!a.is_empty());
        assert_eq!(a, b, "{args:?}");
    }
}

#[test]
fn threads_do_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["chowla-avg", "--x", "2e4", "--h", "20", "--param", "check_x=2000"];
    let one = run_to(dir.path(), "one.csv", &[&args[..], &["--threads", "1"]].concat());
    let three = run_to(dir.path(), "three.csv", &[&args[..], &["--threads", "3"]].concat());
    assert_eq!(one, three);
}

#[test]
fn list_covers_catalog() {
    let o = lab(&["list"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    let names: Vec<&str> = text.lines().filter(|l| !l.starts_with(' ')).collect();
    assert!(names.len() >= 15, "{names:?}");
    assert_eq!(text.matches("  anchor: ").count(), names.len());
    assert_eq!(lab(&["list"]).stdout, text.into_bytes());
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# squarefree density\nx = 1e4\nseed = 3\nformat = json\n").unwrap();
    let o = lab(&["squarefree", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v[0]["parameters"], "x=1e4");
    assert_eq!(v[0]["seed"], 3);
    let o = lab(&["squarefree", "--config", cfg.to_str().unwrap(), "--x", "2e4", "--format", "csv"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains(",x=2e4,"), "{text}");
    assert!(text.lines().nth(1).unwrap().ends_with(",3,"));
}

#[test]
fn timing_fills_wall_time() {
    let o = lab(&["squarefree", "--x", "1e4", "--timing"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    let last = text.lines().nth(1).unwrap().rsplit(',').next().unwrap();
    assert!(last.parse::<f64>().unwrap() >= 0.0);
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(code(&lab(&["no-such-experiment"])), 2);
    assert_eq!(code(&lab(&["squarefree", "--param", "bogus=1"])), 2);
    assert_eq!(code(&lab(&["squarefree", "--x", "ten"])), 2);
    assert_eq!(code(&lab(&["squarefree", "--x", "0"])), 2);
    assert_eq!(code(&lab(&["squarefree", "--config", "/nonexistent/run.cfg"])), 2);
    assert_eq!(code(&lab(&["squarefree", "--threads", "0"])), 2);
}

#[test]
fn budget_exceeded_exits_3() {
    let o = lab(&["entropy", "--x", "1e5", "--w", "10", "--h", "40"]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("resource limit"));
    assert_eq!(code(&lab(&["sieve-check", "--param", "n=1e13"])), 3);
}

#[test]
fn envelope_failure_exits_1() {
    let o = lab(&["variance", "--x", "1e5", "--h", "1e2,1e1"]);
    assert_eq!(code(&o), 1);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.lines().any(|l| l.ends_with(",false,0,")));
}
