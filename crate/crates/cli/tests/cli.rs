use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_factor-calc"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("factor-calc-cli-{}-{}", std::process::id(), name));
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn run_script(name: &str, src: &str, args: &[&str]) -> (Output, PathBuf) {
    let dir = scratch(name);
    let path = dir.join("script.fc");
    fs::write(&path, src).unwrap();
    let out = bin().arg(&path).args(args).current_dir(&dir).output().unwrap();
    (out, dir)
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn script_prints_results_and_exits_zero() {
    let src = "# worked example\n:nf dsum(1/2: LF(2), 1/2: C) * LF(4)\n:fdim dsum(1/2: LF(2), 1/2: C) * LF(4)\n:iso LF(3)*LF(2) LF(5)\n";
    let (out, _) = run_script("ok", src, &["--check"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out), "LF(5)\n5\nisomorphic (1 step: FGF additivity)\n");
}

#[test]
fn exit_codes_follow_severity() {
    let (out, _) = run_script("diag", ":nf dsum(1/2: C\n", &[]);
    assert_eq!(out.status.code(), Some(1));
    let (out, _) = run_script("engine", ":trade sub(N, [1/2, Q]) Q 1\n:nf dsum(1/2: C\n", &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("deficit 3/4"));
}

#[test]
fn mode_flag_and_json_output() {
    let (out, dir) = run_script("json", ":iso LF(2) LF(3)\n", &["--mode", "collapsed", "--json", "out.json"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out), "isomorphic\n");
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("out.json")).unwrap()).unwrap();
    assert_eq!(v[0]["result"]["verdict"], "isomorphic");
    assert!(v[0]["result"]["left"]["steps"].is_array());
}

#[test]
fn stdin_is_read_without_a_script() {
    use std::io::Write;
    use std::process::Stdio;
    let mut child = bin().stdin(Stdio::piped()).stdout(Stdio::piped()).spawn().unwrap();
    child.stdin.take().unwrap().write_all(b":fdim M(2)\n:quit\n:fdim C\n").unwrap();
    let out = child.wait_with_output().unwrap();
    assert_eq!(stdout(&out), "3/4\n");
}

#[test]
fn check_subcommand_runs_suites() {
    let dir = scratch("check");
    let out = bin().args(["check", "--suite", "words", "--n", "50", "--seed", "3", "--out"]).arg(&dir).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    let text = stdout(&out);
    assert_eq!(text.lines().count(), 3);
    assert!(text.lines().all(|l| l.ends_with(": pass")));
    let bad = bin().args(["check", "--suite", "nope"]).output().unwrap();
    assert_ne!(bad.status.code(), Some(0));
}
