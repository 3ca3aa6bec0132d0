//! Exit codes and stage ordering of the `diffract` binary.

use std::path::PathBuf;
use std::process::Command;

fn scenario(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/scenarios").join(format!("{name}.toml"))
}

fn scratch(tag: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("diffract-cli-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    d
}

fn run(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_diffract")).args(args).output().expect("binary runs");
    (out.status.code().unwrap_or(-1), String::from_utf8_lossy(&out.stdout).into_owned())
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(run(&[]).0, 2);
    assert_eq!(run(&["classify"]).0, 2);
    assert_eq!(run(&["classify", "--scenario", "/nonexistent/x.toml"]).0, 2);
    assert_eq!(run(&["frobnicate"]).0, 2);
    let p = scenario("parabola");
    let p = p.to_str().unwrap();
    assert_eq!(run(&["classify", "--scenario", p, "--eps", "0.05,0.1"]).0, 2);
    assert_eq!(run(&["classify", "--scenario", p, "--threads", "zero"]).0, 2);
}

#[test]
fn help_exits_with_zero() {
    let (code, text) = run(&["--help"]);
    assert_eq!(code, 0);
    for sub in ["classify", "trace", "flowmap", "jacobian", "zeta", "profiles", "synthesize", "verify", "report"] {
        assert!(text.contains(sub), "{sub} missing from help");
    }
}

#[test]
fn stages_run_in_order() {
    let dir = scratch("order");
    let p = scenario("parabola");
    let (p, d) = (p.to_str().unwrap(), dir.to_str().unwrap());
    assert_eq!(run(&["trace", "--scenario", p, "--out", d]).0, 2);
    let (code, text) = run(&["classify", "--scenario", p, "--out", d, "--seed", "5"]);
    assert_eq!(code, 0, "{text}");
    assert!(text.contains("PASS"));
    assert!(dir.join("classify.manifest.json").exists());
    assert_eq!(run(&["trace", "--scenario", p, "--out", d, "--seed", "5"]).0, 0);
    assert_eq!(run(&["flowmap", "--scenario", p, "--out", d, "--seed", "6"]).0, 1);
    std::fs::remove_dir_all(&dir).unwrap();
}
