use std::path::Path;
use std::process::{Command, Output};

fn rvmb(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rvmb")).args(args).env_remove("RVMB_SEED").output().expect("spawn rvmb")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_config(dir: &Path, json: &str) -> String {
    let p = dir.join("cfg.json");
    std::fs::write(&p, json).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn run_writes_all_report_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(dir.path(), &format!(r#"{{"benchmarks": ["matmul16"], "output_dir": {:?}}}"#, out));
    let o = rvmb(&["run", &cfg]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("## Speedup"));
    for ext in ["csv", "json", "md"] {
        assert!(out.join(format!("results.{ext}")).exists());
    }
    let csv = std::fs::read_to_string(out.join("results.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert!(csv.starts_with("benchmark,model,cycles,instructions,cpi,f_IntAlu,"));

    let again = rvmb(&["report", out.to_str().unwrap(), "--format", "csv"]);
    assert_eq!(code(&again), 0);
    assert_eq!(stdout(&again), csv);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let empty = write_config(dir.path(), r#"{"benchmarks": []}"#);
    assert_eq!(code(&rvmb(&["run", &empty])), 2);
    assert_eq!(code(&rvmb(&["run", "/nonexistent/config.json"])), 2);

    let bad = write_config(dir.path(), r#"{"benchmarks": ["matmul16", "not_a_benchmark"], "models": ["atomic"]}"#);
    let o = rvmb(&["run", &bad]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("not_a_benchmark"));

    assert_eq!(code(&rvmb(&["bench", "matmul16", "--model", "nosuchmodel"])), 2);
    assert_eq!(code(&rvmb(&["diff", "matmul16", "--models", "minor"])), 2);
    assert_eq!(code(&rvmb(&["frobnicate"])), 2);
}

#[test]
fn bench_single_cell() {
    let o = rvmb(&["bench", "matmul16", "--model", "o3", "--format", "csv"]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[1].starts_with("matmul16,o3,"));
}

#[test]
fn diff_pass_and_injected_failure() {
    let o = rvmb(&["diff", "matmul16", "--models", "atomic,minor,o3"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("PASS matmul16"));

    let o = rvmb(&["diff", "matmul16", "--models", "atomic,o3", "--inject-fma-fault", "o3:15"]);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("first divergence at byte"));
}

#[test]
fn seed_env_override() {
    let digest = |seed: Option<&str>| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_rvmb"));
        c.args(["bench", "matmul16", "--model", "atomic", "--format", "csv"]).env_remove("RVMB_SEED");
        if let Some(s) = seed {
            c.env("RVMB_SEED", s);
        }
        let o = c.output().unwrap();
        assert_eq!(code(&o), 0);
        stdout(&o).lines().nth(1).unwrap().rsplit(',').next().unwrap().to_string()
    };
    assert_eq!(digest(Some("7")), digest(Some("7")));
    assert_ne!(digest(Some("7")), digest(Some("8")));
    assert_eq!(digest(None), digest(Some("1")));

    let mut c = Command::new(env!("CARGO_BIN_EXE_rvmb"));
    let o = c.args(["bench", "matmul16"]).env("RVMB_SEED", "banana").output().unwrap();
    assert_eq!(code(&o), 2);
}
